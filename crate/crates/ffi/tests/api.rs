use std::ffi::{c_char, CStr, CString};
use std::ptr;

use mdmsim::oracle::DFASpec;
use mdmsim_ffi::*;

fn owned(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let t = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { mdm_string_free(s) };
    t
}

fn parse(src: &str) -> *mut MdmMachine {
    let c = CString::new(src).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mdm_machine_parse(c.as_ptr(), &mut m) }, MdmStatus::Ok);
    m
}

fn parity_mdm() -> (*mut MdmMachine, *mut MdmMachine) {
    let dfa = parse(&DFASpec::parity().to_text());
    let mut mdm = ptr::null_mut();
    assert_eq!(unsafe { mdm_compile(dfa, c"mdm".as_ptr(), 0, 8, 3, &mut mdm) }, MdmStatus::Ok);
    (dfa, mdm)
}

#[test]
fn compile_run_verify() {
    let (dfa, mdm) = parity_mdm();
    assert_eq!(unsafe { CStr::from_ptr(mdm_machine_kind(mdm)) }, c"mdm");
    let (mut y, mut tr) = (ptr::null_mut(), ptr::null_mut());
    let st = unsafe { mdm_run(mdm, c"1101".as_ptr(), 0, 0, false, 0, &mut y, &mut tr) };
    assert_eq!(st, MdmStatus::Ok);
    assert!(owned(y).ends_with("<rej>"));
    assert!(owned(tr).contains("counters steps=4 "));
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { mdm_verify(dfa, mdm, c"shortlex:0..5".as_ptr(), &mut rep) }, MdmStatus::Ok);
    assert!(owned(rep).contains("verdict=pass"));
    unsafe {
        mdm_machine_free(mdm);
        mdm_machine_free(dfa);
    }
}

#[test]
fn text_round_trips() {
    let (dfa, mdm) = parity_mdm();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { mdm_machine_to_text(mdm, &mut t) }, MdmStatus::Ok);
    let t = owned(t);
    assert!(t.starts_with("MACHINE mdm\nCERT dfa -> mdm"));
    let again = parse(&t);
    let mut t2 = ptr::null_mut();
    unsafe { mdm_machine_to_text(again, &mut t2) };
    assert_eq!(owned(t2), t);
    unsafe {
        mdm_machine_free(again);
        mdm_machine_free(mdm);
        mdm_machine_free(dfa);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mdm_machine_parse(c"MACHINE nonsense\nEND\n".as_ptr(), &mut m) }, MdmStatus::Parse);
    assert!(m.is_null());
    let msg = unsafe { CStr::from_ptr(mdm_last_error()) }.to_str().unwrap();
    assert!(msg.contains("unknown machine kind"), "{msg}");
    assert_eq!(unsafe { mdm_machine_parse(ptr::null(), &mut m) }, MdmStatus::NullArgument);

    let (dfa, mdm) = parity_mdm();
    let mut y = ptr::null_mut();
    assert_eq!(unsafe { mdm_run(mdm, c"10x".as_ptr(), 0, 0, false, 0, &mut y, ptr::null_mut()) }, MdmStatus::Parse);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mdm_compile(dfa, c"plt".as_ptr(), 0, 8, 3, &mut out) }, MdmStatus::Unsupported);
    let msg = unsafe { CStr::from_ptr(mdm_last_error()) }.to_str().unwrap();
    assert!(msg.contains("mdm->plt"), "{msg}");
    unsafe {
        mdm_machine_free(mdm);
        mdm_machine_free(dfa);
        mdm_machine_free(ptr::null_mut());
        mdm_string_free(ptr::null_mut());
    }
}

#[test]
fn gadget_suite_passes() {
    for p in [2, 3] {
        let mut rep = ptr::null_mut();
        assert_eq!(unsafe { mdm_gadget_suite(p, 0, &mut rep) }, MdmStatus::Ok);
        assert!(!owned(rep).contains("FAIL"));
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mdmsim.h")).unwrap();
    for f in ["mdm_machine_parse", "mdm_run", "mdm_compile", "mdm_verify", "mdm_last_error", "MDM_STATUS_OK", "typedef struct MdmMachine MdmMachine"] {
        assert!(h.contains(f), "{f} missing from header");
    }
}
