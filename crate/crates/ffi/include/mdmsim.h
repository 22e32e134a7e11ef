#ifndef MDMSIM_H
#define MDMSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum MdmStatus {
  MDM_STATUS_OK = 0,
  MDM_STATUS_NULL_ARGUMENT = 1,
  MDM_STATUS_INVALID_UTF8 = 2,
  MDM_STATUS_PARSE = 3,
  MDM_STATUS_INVALID_SPEC = 4,
  MDM_STATUS_RUN = 5,
  MDM_STATUS_UNSUPPORTED = 6,
  MDM_STATUS_IO = 7,
  /**
   * A check ran and failed.
   */
  MDM_STATUS_FAILED = 8,
  MDM_STATUS_PANIC = 9,
} MdmStatus;

/**
 * A loaded machine with its certificate, if any.
 */
typedef struct MdmMachine MdmMachine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * call on the same thread; never null.
 */
const char *mdm_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mdm_string_free(char *s);

/**
 * Parses a machine file held in `src`.
 *
 * # Safety
 * `src` must be a NUL-terminated string; `out` a writable slot.
 */
enum MdmStatus mdm_machine_parse(const char *src, struct MdmMachine **out);

/**
 * Reads and parses the machine file at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a writable slot.
 */
enum MdmStatus mdm_machine_load(const char *path, struct MdmMachine **out);

/**
 * # Safety
 * `m` must come from this library and not have been freed.
 */
void mdm_machine_free(struct MdmMachine *m);

/**
 * Machine kind (`mdm`, `plt`, `pcot`, `transformer`, `dfa`) as a static
 * string, or null for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
const char *mdm_machine_kind(const struct MdmMachine *m);

/**
 * Machine file text, certificate included.
 *
 * # Safety
 * `m` must be a live handle; `out` a writable slot.
 */
enum MdmStatus mdm_machine_to_text(const struct MdmMachine *m, char **out);

/**
 * Runs `m` on `input`, with steps and padding from its certificate (a
 * zero `steps` or `padding` means no override). With `sample` set the run
 * samples with `seed`; otherwise it decodes by argmax. Writes the outputs
 * (space separated) and the trace text.
 *
 * # Safety
 * `m` a live handle, `input` NUL-terminated, each out slot null or writable.
 */
enum MdmStatus mdm_run(const struct MdmMachine *m,
                       const char *input,
                       uintptr_t steps,
                       uintptr_t padding,
                       bool sample,
                       uint64_t seed,
                       char **out_outputs,
                       char **out_trace);

/**
 * Compiles `m` to `target` (see `mdmsim compile --help`). `n` is the input
 * length for length-specific compilations (0 for none), `max_n` the
 * longest input, `p` the precision for DFA sources (0 for the default).
 *
 * # Safety
 * `m` a live handle, `target` NUL-terminated, `out` writable.
 */
enum MdmStatus mdm_compile(const struct MdmMachine *m,
                           const char *target,
                           uintptr_t n,
                           uintptr_t max_n,
                           uint32_t p,
                           struct MdmMachine **out);

/**
 * Checks `a` against `b` on `inputs` (`shortlex:LO..HI`,
 * `random:COUNT:LO..HI` or a file path) over the alphabet of `b` when it
 * is a DFA, else of `a`. Writes the report; returns `Failed` when the
 * machines disagree or a bound is exceeded.
 *
 * # Safety
 * `a`, `b` live handles, `inputs` NUL-terminated, `out_report` null or writable.
 */
enum MdmStatus mdm_verify(const struct MdmMachine *a,
                          const struct MdmMachine *b,
                          const char *inputs,
                          char **out_report);

/**
 * Runs the gadget suite at precision `p` and writes one line per check.
 *
 * # Safety
 * `out_report` null or writable.
 */
enum MdmStatus mdm_gadget_suite(uint32_t p, uint64_t seed, char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDMSIM_H */
