#pragma once

#include "andikit/autodiff/adam.hpp"
#include "andikit/autodiff/gradcheck.hpp"
#include "andikit/autodiff/ops.hpp"
#include "andikit/autodiff/tensor.hpp"
