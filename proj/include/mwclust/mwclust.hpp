#pragma once

#include "mwclust/checks.hpp"
#include "mwclust/common.hpp"
#include "mwclust/config.hpp"
#include "mwclust/design.hpp"
#include "mwclust/estimator.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/oracle.hpp"
#include "mwclust/population.hpp"
#include "mwclust/rng.hpp"
#include "mwclust/table.hpp"
#include "mwclust/variance.hpp"
