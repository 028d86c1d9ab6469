#pragma once

#include "entrisk/core_ensemble.hpp"
#include "entrisk/csv_io.hpp"
#include "entrisk/error.hpp"
#include "entrisk/infoflow.hpp"
#include "entrisk/pathrisk.hpp"
#include "entrisk/quadrature.hpp"
#include "entrisk/quasistatic.hpp"
#include "entrisk/random.hpp"
#include "entrisk/rootfind.hpp"
#include "entrisk/thermalize.hpp"
#include "entrisk/tilt.hpp"
