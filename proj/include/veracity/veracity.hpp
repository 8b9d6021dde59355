#pragma once

#include "veracity/autograd.hpp"
#include "veracity/bundle_io.hpp"
#include "veracity/checkpoint.hpp"
#include "veracity/corpus.hpp"
#include "veracity/encoder.hpp"
#include "veracity/error.hpp"
#include "veracity/heads.hpp"
#include "veracity/label.hpp"
#include "veracity/metrics.hpp"
#include "veracity/model.hpp"
#include "veracity/optim.hpp"
#include "veracity/run_io.hpp"
#include "veracity/synthetic.hpp"
#include "veracity/text.hpp"
#include "veracity/tokenizer.hpp"
#include "veracity/training.hpp"
