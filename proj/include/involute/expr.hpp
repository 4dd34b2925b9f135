#pragma once

#include "involute/expr/differentiate.hpp"
#include "involute/expr/evaluate.hpp"
#include "involute/expr/expression.hpp"
#include "involute/expr/parse.hpp"
#include "involute/expr/simplify.hpp"
