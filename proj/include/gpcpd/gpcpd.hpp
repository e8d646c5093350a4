#ifndef GPCPD_GPCPD_HPP
#define GPCPD_GPCPD_HPP

#include <gpcpd/bocpd.hpp>
#include <gpcpd/cbocpd.hpp>
#include <gpcpd/error.hpp>
#include <gpcpd/eval.hpp>
#include <gpcpd/glrt.hpp>
#include <gpcpd/gp.hpp>
#include <gpcpd/io.hpp>
#include <gpcpd/kernels.hpp>
#include <gpcpd/matcore.hpp>
#include <gpcpd/random.hpp>
#include <gpcpd/synth.hpp>
#include <gpcpd/version.hpp>

#endif
