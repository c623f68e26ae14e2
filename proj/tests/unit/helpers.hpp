#pragma once

#include <doctest.h>

#include "s2vae/error.hpp"

// Runs `expr` and checks that it throws s2vae::Error of the given kind.
#define CHECK_ERROR_KIND(expr, k)                          \
  do {                                                     \
    bool caught_ = false;                                  \
    try {                                                  \
      (void)(expr);                                        \
    } catch (const ::s2vae::Error& e_) {                   \
      caught_ = true;                                      \
      CHECK(e_.kind() == (k));                             \
    }                                                      \
    CHECK_MESSAGE(caught_, "expected an error: " #expr);   \
  } while (0)
