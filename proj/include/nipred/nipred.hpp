#pragma once

#include "nipred/pipeline/deploy.hpp"
#include "nipred/pipeline/dev.hpp"
