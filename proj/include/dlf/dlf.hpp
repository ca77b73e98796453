#pragma once

#include "dlf/errors.hpp"
#include "dlf/evaluation.hpp"
#include "dlf/ingest.hpp"
#include "dlf/km.hpp"
#include "dlf/landscape.hpp"
#include "dlf/metrics.hpp"
#include "dlf/model.hpp"
#include "dlf/neural.hpp"
#include "dlf/records.hpp"
#include "dlf/synth.hpp"
#include "dlf/train.hpp"
#include "dlf/vocabulary.hpp"
