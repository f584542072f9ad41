#pragma once

#include "ffp/error.hpp"
#include "ffp/rng.hpp"
#include "ffp/stats.hpp"
#include "ffp/lattice.hpp"
#include "ffp/cluster_index.hpp"
#include "ffp/engine.hpp"
#include "ffp/parallel.hpp"
#include "ffp/measure.hpp"
#include "ffp/exact.hpp"
#include "ffp/sampling.hpp"
#include "ffp/blur.hpp"
#include "ffp/ccsb.hpp"
#include "ffp/coupling.hpp"
#include "ffp/scan.hpp"
#include "ffp/manifest.hpp"
#include "ffp/experiments.hpp"
