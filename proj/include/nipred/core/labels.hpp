#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "nipred/core/error.hpp"

namespace nipred {

// Ids 0..5 double as the multi-class label map; Unlabeled is never a training target.
enum class Label : std::uint8_t {
    Normal = 0,
    DDoS = 1,
    BrowserHijacking = 2,
    CommandInjection = 3,
    XSS = 4,
    BackdoorMalware = 5,
    Unlabeled = 6,
};

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<std::string_view, 7> kLabelNames = {
    "Normal", "DDoS", "BrowserHijacking", "CommandInjection", "XSS", "BackdoorMalware", "Unlabeled"};

inline std::string_view label_name(Label l) { return kLabelNames[static_cast<std::size_t>(l)]; }

inline std::optional<Label> parse_label(std::string_view s) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i)
        if (kLabelNames[i] == s) return static_cast<Label>(i);
    return std::nullopt;
}

inline bool is_attack(Label l) { return l != Label::Normal && l != Label::Unlabeled; }

enum class ClassMode { Binary, Multiclass };

inline std::size_t num_classes(ClassMode mode) { return mode == ClassMode::Binary ? 2 : kNumClasses; }

/// Class id for training targets. Binary: 0 = Normal, 1 = Attack.
inline int class_id(Label l, ClassMode mode) {
    if (l == Label::Unlabeled) fail(ErrorCode::LabelOutOfRange, "unlabeled sample has no class id");
    if (mode == ClassMode::Binary) return is_attack(l) ? 1 : 0;
    return static_cast<int>(l);
}

inline std::string class_name(int id, ClassMode mode) {
    if (mode == ClassMode::Binary) return id == 0 ? "Normal" : "Attack";
    return std::string(label_name(static_cast<Label>(id)));
}

}  // namespace nipred
