#pragma once

#include "gml/augment.hpp"
#include "gml/error.hpp"
#include "gml/eval.hpp"
#include "gml/frontend.hpp"
#include "gml/gammatone.hpp"
#include "gml/harness/config.hpp"
#include "gml/harness/csv.hpp"
#include "gml/harness/dataset.hpp"
#include "gml/harness/manifest.hpp"
#include "gml/harness/synthetic.hpp"
#include "gml/io.hpp"
#include "gml/json_config.hpp"
#include "gml/net/adam.hpp"
#include "gml/net/checkpoint.hpp"
#include "gml/net/config.hpp"
#include "gml/net/kfold.hpp"
#include "gml/net/model.hpp"
#include "gml/net/network.hpp"
#include "gml/net/train.hpp"
#include "gml/net/train_config.hpp"
#include "gml/prob.hpp"
#include "gml/random.hpp"
#include "gml/report.hpp"
#include "gml/signal.hpp"
#include "gml/special.hpp"
#include "gml/spectrogram_cache.hpp"
#include "gml/wav.hpp"
