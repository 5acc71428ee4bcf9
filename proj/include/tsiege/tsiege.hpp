#pragma once

// Umbrella header for the traction-siege library.

#include "tsiege/attack.hpp"
#include "tsiege/canbus.hpp"
#include "tsiege/cli.hpp"
#include "tsiege/controller.hpp"
#include "tsiege/digest.hpp"
#include "tsiege/firmware.hpp"
#include "tsiege/harness.hpp"
#include "tsiege/ids.hpp"
#include "tsiege/io.hpp"
#include "tsiege/metrics.hpp"
#include "tsiege/plant.hpp"
#include "tsiege/rng.hpp"
#include "tsiege/scenario.hpp"
#include "tsiege/threatmodel.hpp"
#include "tsiege/version.hpp"
