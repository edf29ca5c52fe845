#pragma once

#include "increlearn/acquisition.hpp"
#include "increlearn/config.hpp"
#include "increlearn/datasets.hpp"
#include "increlearn/error.hpp"
#include "increlearn/experiments.hpp"
#include "increlearn/feature_labeler.hpp"
#include "increlearn/incremental.hpp"
#include "increlearn/kmeans.hpp"
#include "increlearn/metrics.hpp"
#include "increlearn/report.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/snapshot.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/synthetic.hpp"
#include "increlearn/text_format.hpp"
#include "increlearn/types.hpp"
