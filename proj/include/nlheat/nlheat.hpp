#pragma once

#include "nlheat/analysis.hpp"
#include "nlheat/convolution.hpp"
#include "nlheat/error.hpp"
#include "nlheat/evolution.hpp"
#include "nlheat/expression.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/growth.hpp"
#include "nlheat/heat_kernel.hpp"
#include "nlheat/io.hpp"
#include "nlheat/kernels.hpp"
#include "nlheat/polysol.hpp"
