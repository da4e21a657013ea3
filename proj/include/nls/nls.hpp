#pragma once

#include "errors.hpp"
#include "parallel.hpp"
#include "numerics.hpp"
#include "core.hpp"
#include "datagen.hpp"
#include "eval.hpp"
#include "io.hpp"
