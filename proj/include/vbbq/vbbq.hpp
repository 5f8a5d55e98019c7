#pragma once

// Everything at once.

#include "attack.hpp"
#include "bits.hpp"
#include "candidates.hpp"
#include "cc_obf.hpp"
#include "circuit_ir.hpp"
#include "cli.hpp"
#include "families.hpp"
#include "fhe_core.hpp"
#include "garbling.hpp"
#include "oracle_sim.hpp"
#include "pk_decompose.hpp"
#include "prf.hpp"
#include "qfhe.hpp"
#include "qsim.hpp"
#include "simon.hpp"
#include "stats.hpp"
#include "verify.hpp"
