#pragma once

#include "synthmetric/cart.hpp"
#include "synthmetric/dataset.hpp"
#include "synthmetric/design.hpp"
#include "synthmetric/glm.hpp"
#include "synthmetric/rng.hpp"
#include "synthmetric/sim.hpp"
#include "synthmetric/stats.hpp"
#include "synthmetric/svg_plot.hpp"
#include "synthmetric/synth.hpp"
#include "synthmetric/utility_general.hpp"
#include "synthmetric/utility_specific.hpp"
