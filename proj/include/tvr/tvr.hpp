#pragma once

#include "tvr/bridge.hpp"
#include "tvr/error.hpp"
#include "tvr/harness.hpp"
#include "tvr/image.hpp"
#include "tvr/json_io.hpp"
#include "tvr/png_io.hpp"
#include "tvr/resurface.hpp"
#include "tvr/total_variation.hpp"
