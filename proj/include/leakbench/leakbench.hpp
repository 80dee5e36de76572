#pragma once

#include "leakbench/errors.hpp"
#include "leakbench/rng.hpp"
#include "leakbench/text.hpp"
#include "leakbench/secretmodel.hpp"
#include "leakbench/query.hpp"
#include "leakbench/oracle.hpp"
#include "leakbench/leakage.hpp"
#include "leakbench/defense/shingles.hpp"
#include "leakbench/defense/sanitizer.hpp"
#include "leakbench/defense/spotlight.hpp"
#include "leakbench/defense/detector.hpp"
#include "leakbench/defense/output_filter.hpp"
#include "leakbench/defense/roc.hpp"
#include "leakbench/attacker.hpp"
#include "leakbench/harness/corpus.hpp"
#include "leakbench/harness/scenario.hpp"
#include "leakbench/harness/runner.hpp"
#include "leakbench/harness/generate.hpp"
