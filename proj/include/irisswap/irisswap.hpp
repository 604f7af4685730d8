#pragma once

#include "irisswap/error.hpp"
#include "irisswap/imaging.hpp"
#include "irisswap/segmentation.hpp"
#include "irisswap/rubbersheet.hpp"
#include "irisswap/iriscode.hpp"
#include "irisswap/gaze.hpp"
#include "irisswap/synth.hpp"
#include "irisswap/liveness.hpp"
#include "irisswap/config.hpp"
#include "irisswap/pipeline.hpp"
#include "irisswap/experiment.hpp"
