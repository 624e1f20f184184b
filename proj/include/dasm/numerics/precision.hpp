// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The model core (numerics, encoder, decoder, loss) is compiled twice: the
// production library in 32-bit float and a 64-bit twin used by gradient
// verification. Each build lives in its own inline namespace so both can be
// linked into one binary without symbol clashes.
#ifdef DASM_F64
#define DASM_PRECISION_NS f64
#else
#define DASM_PRECISION_NS f32
#endif

#define DASM_BEGIN_NAMESPACE \
  namespace dasm {           \
  inline namespace DASM_PRECISION_NS {
#define DASM_END_NAMESPACE \
  }                        \
  }

DASM_BEGIN_NAMESPACE

#ifdef DASM_F64
using Real = double;
#else
using Real = float;
#endif

DASM_END_NAMESPACE
