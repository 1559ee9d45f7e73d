#pragma once

// Everything in one include.

#include "natlog/error.hpp"
#include "natlog/term.hpp"
#include "natlog/hilog.hpp"
#include "natlog/syntax.hpp"
#include "natlog/unify.hpp"
#include "natlog/ground_db.hpp"
#include "natlog/neural_index.hpp"
#include "natlog/host.hpp"
#include "natlog/engine.hpp"
