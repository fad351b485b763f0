#pragma once

#include "pfc/core/linalg.hpp"
#include "pfc/core/random.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/channel.hpp"
#include "pfc/model/generic_channel.hpp"
#include "pfc/model/ofdm.hpp"
#include "pfc/model/plant.hpp"
#include "pfc/predict/baselines.hpp"
#include "pfc/predict/kalman.hpp"
#include "pfc/predict/metrics.hpp"
#include "pfc/predict/nonlinear.hpp"
#include "pfc/control/classical.hpp"
#include "pfc/control/kernel_io.hpp"
#include "pfc/control/quantizer.hpp"
#include "pfc/control/riccati.hpp"
#include "pfc/harness/config.hpp"
#include "pfc/harness/csv.hpp"
#include "pfc/harness/sweep.hpp"
#include "pfc/harness/trial.hpp"
