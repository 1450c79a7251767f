#pragma once

#include "stacknet/attack.hpp"
#include "stacknet/baselines.hpp"
#include "stacknet/classification.hpp"
#include "stacknet/config.hpp"
#include "stacknet/csv.hpp"
#include "stacknet/io.hpp"
#include "stacknet/metrics.hpp"
#include "stacknet/params.hpp"
#include "stacknet/regression.hpp"
#include "stacknet/reliability.hpp"
#include "stacknet/rng.hpp"
#include "stacknet/runner.hpp"
#include "stacknet/spectral.hpp"
#include "stacknet/synthetic.hpp"
#include "stacknet/table.hpp"
#include "stacknet/version.hpp"
