#pragma once

#include "analysis.hpp"
#include "dense.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "lstd.hpp"
#include "mrp.hpp"
#include "parallel.hpp"
#include "seeding.hpp"
