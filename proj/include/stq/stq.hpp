#pragma once

#include "engine.hpp"
#include "feasibility.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "planner.hpp"
#include "qsim.hpp"
#include "render.hpp"
#include "schemes.hpp"
