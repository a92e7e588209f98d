#pragma once

// Umbrella header.

#include "tmprompt/bleu.hpp"
#include "tmprompt/config.hpp"
#include "tmprompt/decoder.hpp"
#include "tmprompt/error.hpp"
#include "tmprompt/eval.hpp"
#include "tmprompt/fragment.hpp"
#include "tmprompt/model1.hpp"
#include "tmprompt/retrieval.hpp"
#include "tmprompt/synthetic.hpp"
#include "tmprompt/templates.hpp"
#include "tmprompt/tm_store.hpp"
#include "tmprompt/tokenize.hpp"
#include "tmprompt/toy_model.hpp"
