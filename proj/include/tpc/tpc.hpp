// tpc.hpp - everything
#pragma once

#include "analysis.hpp"
#include "arq.hpp"
#include "channel.hpp"
#include "combiner.hpp"
#include "decoder.hpp"
#include "harness.hpp"
#include "llr.hpp"
#include "numerics.hpp"
#include "rng.hpp"
#include "tx.hpp"
