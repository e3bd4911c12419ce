#pragma once

#include "glassgpt/checkpoint.hpp"
#include "glassgpt/error.hpp"
#include "glassgpt/forward.hpp"
#include "glassgpt/model.hpp"
#include "glassgpt/sampler.hpp"
#include "glassgpt/tensor.hpp"
#include "glassgpt/tokenizer.hpp"
#include "glassgpt/trace.hpp"
#include "glassgpt/trace_json.hpp"
#include "glassgpt/unicode.hpp"
