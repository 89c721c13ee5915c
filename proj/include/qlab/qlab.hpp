#pragma once

#include "qlab/asymptotics.hpp"
#include "qlab/bd_chain.hpp"
#include "qlab/laplace_audit.hpp"
#include "qlab/log_weight.hpp"
#include "qlab/model_params.hpp"
#include "qlab/parallel.hpp"
#include "qlab/simulator.hpp"
#include "qlab/sweep.hpp"
#include "qlab/records.hpp"
