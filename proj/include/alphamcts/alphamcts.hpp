#pragma once

#include "alphamcts/chat.hpp"
#include "alphamcts/config.hpp"
#include "alphamcts/dimension.hpp"
#include "alphamcts/engine.hpp"
#include "alphamcts/error.hpp"
#include "alphamcts/evaluator.hpp"
#include "alphamcts/expr.hpp"
#include "alphamcts/fsa.hpp"
#include "alphamcts/genes.hpp"
#include "alphamcts/generator.hpp"
#include "alphamcts/grammar.hpp"
#include "alphamcts/grid.hpp"
#include "alphamcts/interchange.hpp"
#include "alphamcts/mcts.hpp"
#include "alphamcts/metrics.hpp"
#include "alphamcts/mining.hpp"
#include "alphamcts/mock_chat.hpp"
#include "alphamcts/operators.hpp"
#include "alphamcts/panel.hpp"
#include "alphamcts/prompts.hpp"
#include "alphamcts/random.hpp"
#include "alphamcts/stats.hpp"
#include "alphamcts/synthetic.hpp"
#include "alphamcts/validate.hpp"
#include "alphamcts/zoo.hpp"
