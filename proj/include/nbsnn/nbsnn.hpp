#pragma once

#include "nbsnn/adam.hpp"
#include "nbsnn/bayes.hpp"
#include "nbsnn/checkpoint.hpp"
#include "nbsnn/config.hpp"
#include "nbsnn/dataset.hpp"
#include "nbsnn/encoding.hpp"
#include "nbsnn/energy.hpp"
#include "nbsnn/error.hpp"
#include "nbsnn/eval.hpp"
#include "nbsnn/lif.hpp"
#include "nbsnn/model.hpp"
#include "nbsnn/network.hpp"
#include "nbsnn/rng.hpp"
#include "nbsnn/train.hpp"
