#ifndef AEFOCL_AEFOCL_HPP_
#define AEFOCL_AEFOCL_HPP_

#include "aefocl/analytic_classifier.hpp"
#include "aefocl/class_stats.hpp"
#include "aefocl/diagnostics.hpp"
#include "aefocl/error.hpp"
#include "aefocl/eval.hpp"
#include "aefocl/features.hpp"
#include "aefocl/pfg.hpp"
#include "aefocl/pipeline.hpp"
#include "aefocl/runner.hpp"
#include "aefocl/synth_data.hpp"

#endif  // AEFOCL_AEFOCL_HPP_
