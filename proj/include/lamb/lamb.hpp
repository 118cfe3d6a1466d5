#pragma once

#include "lamb/cluster.hpp"
#include "lamb/dataset.hpp"
#include "lamb/io.hpp"
#include "lamb/latentcorr.hpp"
#include "lamb/matrix.hpp"
#include "lamb/miner.hpp"
#include "lamb/numerics.hpp"
#include "lamb/parallel.hpp"
#include "lamb/simlab.hpp"
#include "lamb/threshold.hpp"
