#pragma once

// Section marks for benchmark code. Each mark compiles to a call to an opaque
// external function `mvee_begin_<ID>` / `mvee_end_<ID>`, which the region
// extractor finds in the emitted assembly. Passing the run input to the begin
// mark and the run output to the end mark keeps the optimizer from moving the
// measured code across the marks.
//
//   size_t r;
//   gen_begin_mark(B1, size_t, n);
//   r = run_b1(data, n);
//   gen_end_mark(B1, size_t, r);
//
// Exactly one translation unit, compiled separately from the marked code,
// must provide the definitions with MVEE_DEFINE_MARKS(ID, TYPE).

#define MVEE_MARK_CALL_(PREFIX, ID, TYPE, VALUE)                           \
  do {                                                                      \
    extern void PREFIX##ID(TYPE) __asm__(#PREFIX #ID);                      \
    __asm__ __volatile__("" ::: "memory");                                  \
    PREFIX##ID(VALUE);                                                      \
    __asm__ __volatile__("" ::: "memory");                                  \
  } while (0)

#define gen_begin_mark(ID, TYPE, VALUE) MVEE_MARK_CALL_(mvee_begin_, ID, TYPE, VALUE)
#define gen_end_mark(ID, TYPE, VALUE) MVEE_MARK_CALL_(mvee_end_, ID, TYPE, VALUE)

#define MVEE_DEFINE_MARKS(ID, TYPE)                                                                 \
  extern void mvee_begin_##ID(TYPE) __asm__("mvee_begin_" #ID);                                     \
  extern void mvee_end_##ID(TYPE) __asm__("mvee_end_" #ID);                                         \
  __attribute__((noinline, used)) void mvee_begin_##ID(TYPE) { __asm__ __volatile__("" ::: "memory"); } \
  __attribute__((noinline, used)) void mvee_end_##ID(TYPE) { __asm__ __volatile__("" ::: "memory"); }
