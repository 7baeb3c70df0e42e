#pragma once

#include "eegclean/cnn/layers.hpp"
#include "eegclean/cnn/network.hpp"
#include "eegclean/cnn/serialize.hpp"
#include "eegclean/cnn/train.hpp"
