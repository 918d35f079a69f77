#pragma once

#include "conind/activations.hpp"
#include "conind/error.hpp"
#include "conind/evaluation.hpp"
#include "conind/expression.hpp"
#include "conind/hierarchy.hpp"
#include "conind/induction.hpp"
#include "conind/knowledge_base.hpp"
#include "conind/label.hpp"
#include "conind/pipeline.hpp"
#include "conind/ratio.hpp"
#include "conind/report.hpp"
#include "conind/stats.hpp"
