#pragma once

// Everything except the HTTP provider and the CLI, which need OpenSSL.

#include "fvrule/dataset.hpp"
#include "fvrule/equivalence.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/evaluation.hpp"
#include "fvrule/external_checker.hpp"
#include "fvrule/inference.hpp"
#include "fvrule/lexicon.hpp"
#include "fvrule/llm.hpp"
#include "fvrule/llm_gateway.hpp"
#include "fvrule/optree.hpp"
#include "fvrule/similarity.hpp"
#include "fvrule/sva_ast.hpp"
#include "fvrule/sva_eval.hpp"
#include "fvrule/sva_parser.hpp"
#include "fvrule/trainer.hpp"
#include "fvrule/tree_library.hpp"
