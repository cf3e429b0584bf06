#pragma once

#include "cpgan/autodiff/adam.hpp"
#include "cpgan/autodiff/conv.hpp"
#include "cpgan/autodiff/ops.hpp"
#include "cpgan/autodiff/tape.hpp"
#include "cpgan/autodiff/tensor.hpp"
