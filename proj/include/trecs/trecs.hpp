#pragma once

#include "trecs/dataset.hpp"
#include "trecs/eval.hpp"
#include "trecs/format.hpp"
#include "trecs/frame.hpp"
#include "trecs/frame_io.hpp"
#include "trecs/preprocess.hpp"
#include "trecs/random.hpp"
#include "trecs/resample.hpp"
#include "trecs/schedule.hpp"
#include "trecs/toy_model.hpp"
