#pragma once

#include "elongate/parallel.hpp"
#include "elongate/geometry.hpp"
#include "elongate/density.hpp"
#include "elongate/field.hpp"
#include "elongate/solver.hpp"
#include "elongate/study.hpp"
#include "elongate/io.hpp"
#include "elongate/config.hpp"
