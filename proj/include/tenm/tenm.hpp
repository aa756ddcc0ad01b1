#pragma once

#include "errors.hpp"
#include "rate.hpp"
#include "kernel.hpp"
#include "params.hpp"
#include "assumptions.hpp"
#include "rng.hpp"
#include "cells.hpp"
#include "steady.hpp"
#include "transport.hpp"
#include "linear.hpp"
#include "experiments.hpp"
#include "config.hpp"
#include "io.hpp"
#include "acceptance.hpp"
