//! C interface to `mdmsim`: load, run, compile and verify machine files.
//!
//! Machines are opaque handles. Every call returns an [`MdmStatus`]; on
//! failure [`mdm_last_error`] describes it. Strings handed out by the
//! library are freed with [`mdm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use mdmsim::cli::{self, CompileArgs, Common};
use mdmsim::compile::MachineFile;
use mdmsim::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidSpec = 4,
    Run = 5,
    Unsupported = 6,
    Io = 7,
    /// A check ran and failed.
    Failed = 8,
    Panic = 9,
}

/// A loaded machine with its certificate, if any.
pub struct MdmMachine {
    file: Arc<MachineFile>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MdmStatus {
    match e {
        Error::Context(_, inner) => status_of(inner),
        Error::Parse { .. } | Error::UnknownSymbol(_) => MdmStatus::Parse,
        Error::Unsupported(..) => MdmStatus::Unsupported,
        Error::Io(_) => MdmStatus::Io,
        Error::Spec(_) | Error::Precision(_) | Error::Shape(_) | Error::Inapplicable(_) | Error::Overflow(_) => MdmStatus::InvalidSpec,
        _ => MdmStatus::Run,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<MdmStatus, (MdmStatus, String)>) -> MdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("panic inside mdmsim");
            MdmStatus::Panic
        }
    }
}

fn fail(e: Error) -> (MdmStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, (MdmStatus, String)> {
    if s.is_null() {
        return Err((MdmStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (MdmStatus::InvalidUtf8, "argument is not UTF-8".into()))
}

unsafe fn machine<'a>(m: *const MdmMachine) -> Result<&'a MdmMachine, (MdmStatus, String)> {
    m.as_ref().ok_or((MdmStatus::NullArgument, "null machine handle".into()))
}

fn give_string(s: String, out: *mut *mut c_char) {
    if !out.is_null() {
        let c = CString::new(s.replace('\0', " ")).unwrap_or_default();
        // SAFETY: checked non-null; the caller provides a writable slot
        unsafe { *out = c.into_raw() };
    }
}

fn give_machine(f: MachineFile, out: *mut *mut MdmMachine) -> Result<MdmStatus, (MdmStatus, String)> {
    if out.is_null() {
        return Err((MdmStatus::NullArgument, "null output slot".into()));
    }
    // SAFETY: checked non-null
    unsafe { *out = Box::into_raw(Box::new(MdmMachine { file: Arc::new(f) })) };
    Ok(MdmStatus::Ok)
}

/// Message of the last failed call on this thread. Valid until the next
/// call on the same thread; never null.
#[no_mangle]
pub extern "C" fn mdm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mdm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a machine file held in `src`.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn mdm_machine_parse(src: *const c_char, out: *mut *mut MdmMachine) -> MdmStatus {
    guard(|| give_machine(MachineFile::parse(text(src)?).map_err(fail)?, out))
}

/// Reads and parses the machine file at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn mdm_machine_load(path: *const c_char, out: *mut *mut MdmMachine) -> MdmStatus {
    guard(|| {
        let p = text(path)?;
        let src = std::fs::read_to_string(p).map_err(|e| fail(Error::from(e).context(p.to_string())))?;
        give_machine(MachineFile::parse(&src).map_err(fail)?, out)
    })
}

/// # Safety
/// `m` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mdm_machine_free(m: *mut MdmMachine) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Machine kind (`mdm`, `plt`, `pcot`, `transformer`, `dfa`) as a static
/// string, or null for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdm_machine_kind(m: *const MdmMachine) -> *const c_char {
    let Some(m) = m.as_ref() else { return ptr::null() };
    let k: &'static CStr = match m.file.machine.kind() {
        "mdm" => c"mdm",
        "plt" => c"plt",
        "pcot" => c"pcot",
        "transformer" => c"transformer",
        _ => c"dfa",
    };
    k.as_ptr()
}

/// Machine file text, certificate included.
///
/// # Safety
/// `m` must be a live handle; `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn mdm_machine_to_text(m: *const MdmMachine, out: *mut *mut c_char) -> MdmStatus {
    guard(|| {
        give_string(machine(m)?.file.to_text(), out);
        Ok(MdmStatus::Ok)
    })
}

/// Runs `m` on `input`, with steps and padding from its certificate (a
/// zero `steps` or `padding` means no override). With `sample` set the run
/// samples with `seed`; otherwise it decodes by argmax. Writes the outputs
/// (space separated) and the trace text.
///
/// # Safety
/// `m` a live handle, `input` NUL-terminated, each out slot null or writable.
#[no_mangle]
pub unsafe extern "C" fn mdm_run(
    m: *const MdmMachine,
    input: *const c_char,
    steps: usize,
    padding: usize,
    sample: bool,
    seed: u64,
    out_outputs: *mut *mut c_char,
    out_trace: *mut *mut c_char,
) -> MdmStatus {
    guard(|| {
        let m = machine(m)?;
        let w = cli::tokenize(text(input)?, &cli::alphabet(&m.file.machine)).map_err(fail)?;
        let c = Common { steps: (steps > 0).then_some(steps), padding: (padding > 0).then_some(padding), seed: sample.then_some(seed), ..Default::default() };
        let (y, tr) = cli::run_resolved(&m.file, &w, &c, &mut Vec::new()).map_err(fail)?;
        give_string(y.join(" "), out_outputs);
        give_string(tr.to_text(), out_trace);
        Ok(MdmStatus::Ok)
    })
}

/// Compiles `m` to `target` (see `mdmsim compile --help`). `n` is the input
/// length for length-specific compilations (0 for none), `max_n` the
/// longest input, `p` the precision for DFA sources (0 for the default).
///
/// # Safety
/// `m` a live handle, `target` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mdm_compile(m: *const MdmMachine, target: *const c_char, n: usize, max_n: usize, p: u32, out: *mut *mut MdmMachine) -> MdmStatus {
    guard(|| {
        let m = machine(m)?;
        let a = CompileArgs {
            source: PathBuf::new(),
            to: text(target)?.to_string(),
            out: None,
            n: (n > 0).then_some(n),
            max_n: if max_n == 0 { 16 } else { max_n },
            stochastic: false,
            common: Common { p: if p == 0 { vec![] } else { vec![p] }, ..Default::default() },
        };
        let f = cli::compile_file(&m.file, &a.to, &a, &mut Vec::new()).map_err(fail)?;
        give_machine(f, out)
    })
}

/// Checks `a` against `b` on `inputs` (`shortlex:LO..HI`,
/// `random:COUNT:LO..HI` or a file path) over the alphabet of `b` when it
/// is a DFA, else of `a`. Writes the report; returns `Failed` when the
/// machines disagree or a bound is exceeded.
///
/// # Safety
/// `a`, `b` live handles, `inputs` NUL-terminated, `out_report` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mdm_verify(a: *const MdmMachine, b: *const MdmMachine, inputs: *const c_char, out_report: *mut *mut c_char) -> MdmStatus {
    guard(|| {
        let (a, b) = (machine(a)?, machine(b)?);
        let alpha = match &b.file.machine {
            mdmsim::compile::Machine::Dfa(d) => d.alphabet.clone(),
            _ => cli::alphabet(&a.file.machine),
        };
        let set = cli::parse_inputs(text(inputs)?, &alpha, 0).map_err(fail)?;
        let rep = cli::verify_pair(a.file.clone(), b.file.clone(), &set, &Common::default());
        give_string(rep.to_text(), out_report);
        Ok(if rep.pass() && rep.bound_failures == 0 { MdmStatus::Ok } else { MdmStatus::Failed })
    })
}

/// Runs the gadget suite at precision `p` and writes one line per check.
///
/// # Safety
/// `out_report` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mdm_gadget_suite(p: u32, seed: u64, out_report: *mut *mut c_char) -> MdmStatus {
    guard(|| {
        let checks = mdmsim::gadgets::suite::run_suite(&[p], seed).map_err(fail)?;
        let mut o = String::new();
        for c in &checks {
            o += &format!("{} {} p={}\n", if c.verdict.is_ok() { "ok" } else { "FAIL" }, c.name, c.p);
        }
        give_string(o, out_report);
        Ok(if checks.iter().all(|c| c.verdict.is_ok()) { MdmStatus::Ok } else { MdmStatus::Failed })
    })
}
