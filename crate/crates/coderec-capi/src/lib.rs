//! C ABI for blind channel-code recognition.
//!
//! This crate exports the decode-and-classify pipeline of the `coderec`
//! library behind a flat C interface: build a candidate-set handle, load
//! trained classifier weights, and score received LLR frames. The header
//! `include/coderec.h` is generated from these declarations at build time.
//!
//! # Conventions
//!
//! - Handles ([`CoderecCandidateSet`], [`CoderecClassifier`]) are opaque;
//!   create them with `*_new`, release them with `*_free`. A `free` on a
//!   null pointer is a no-op, and every other function checks its pointers
//!   before use.
//! - Fallible functions return a [`CoderecStatus`]; `CODEREC_STATUS_OK` is
//!   zero. On failure, [`coderec_last_error`] returns a thread-local,
//!   NUL-terminated description that stays valid until the next failing
//!   call on the same thread.
//! - Frames are `double` LLR arrays (positive favours bit 0, the library's
//!   convention throughout). A frame may be shorter or longer than a
//!   candidate's codeword; it is zero-extended or truncated per candidate,
//!   exactly as the library CLI does.
//! - Handles are not synchronised: sharing one handle across threads
//!   requires external locking ([`CoderecClassifier`] caches activations
//!   between calls). Distinct handles are fully independent.
//!
//! # Minimal use
//!
//! ```c
//! CoderecCandidateSet *set = NULL;
//! CoderecClassifier *clf = NULL;
//! if (coderec_candidate_set_new(CODEREC_SCHEME_LDPC, &set) != CODEREC_STATUS_OK ||
//!     coderec_classifier_new(set, "model.bin", &clf) != CODEREC_STATUS_OK) {
//!     fprintf(stderr, "%s\n", coderec_last_error());
//!     return 1;
//! }
//! size_t class_index = 0;
//! double probs[4] = {0};
//! coderec_classify(clf, llrs, llr_len, probs, &class_index);
//! coderec_classifier_free(clf);
//! coderec_candidate_set_free(set);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use coderec::codebook::{CandidateSet, Scheme};
use coderec::features::{baseline_from_tensor, candidate_evidence, reshape_stack, EvidenceSource};
use coderec::fec::DecoderConfig;
use coderec::nn::{load_network, Network};
use coderec::Error;

// ---------------------------------------------------------------------------
// Status codes and error reporting
// ---------------------------------------------------------------------------

/// Result of a fallible call; `Ok` is zero so it tests false in C.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoderecStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument violated a documented precondition.
    InvalidArgument = 2,
    /// The operating system reported an I/O failure.
    Io = 3,
    /// A file was readable but malformed.
    Format = 4,
    /// The library reached a state that should be unreachable.
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let owned = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message was not representable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail_with(status: CoderecStatus, message: &str) -> CoderecStatus {
    set_last_error(message);
    status
}

fn fail(error: &Error) -> CoderecStatus {
    let status = match error {
        Error::Argument(_) | Error::Config(_) | Error::Metric(_) => CoderecStatus::InvalidArgument,
        Error::Io(_) => CoderecStatus::Io,
        Error::Format(_) => CoderecStatus::Format,
        Error::Construction(_) | Error::Training(_) => CoderecStatus::Internal,
    };
    fail_with(status, &error.to_string())
}

fn null_arg(name: &str) -> CoderecStatus {
    fail_with(CoderecStatus::NullPointer, &format!("{name} must not be null"))
}

/// Message for the most recent failure on this thread.
///
/// Returns a NUL-terminated string owned by the library; it is valid until
/// the next failing call on the same thread and must not be freed. The
/// string is empty when no call has failed yet.
#[no_mangle]
pub extern "C" fn coderec_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string (never null).
#[no_mangle]
pub extern "C" fn coderec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Candidate sets
// ---------------------------------------------------------------------------

/// Code family selector; each value names the default candidate set of one
/// scheme (four LDPC rates, seven convolutional generator pairs, four turbo
/// variants, four shortened polar codes).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoderecScheme {
    Ldpc = 0,
    Conv = 1,
    Turbo = 2,
    Polar = 3,
}

/// Opaque handle over a candidate set and its decoder configuration.
pub struct CoderecCandidateSet {
    set: CandidateSet,
    lengths: Vec<usize>,
    decoder: DecoderConfig,
}

/// Opaque handle over trained classifier weights bound to a candidate set.
pub struct CoderecClassifier {
    set: CandidateSet,
    decoder: DecoderConfig,
    network: Network<f32>,
}

/// Builds the default candidate set for `scheme` into `*out`.
///
/// On success `*out` owns the handle and must be released with
/// [`coderec_candidate_set_free`]. On failure `*out` is left untouched.
#[no_mangle]
pub extern "C" fn coderec_candidate_set_new(
    scheme: CoderecScheme,
    out: *mut *mut CoderecCandidateSet,
) -> CoderecStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let scheme = match scheme {
        CoderecScheme::Ldpc => Scheme::Ldpc,
        CoderecScheme::Conv => Scheme::Conv,
        CoderecScheme::Turbo => Scheme::Turbo,
        CoderecScheme::Polar => Scheme::Polar,
    };
    match CandidateSet::for_scheme(scheme) {
        Ok(set) => {
            let handle = Box::new(CoderecCandidateSet {
                lengths: set.codeword_lens(),
                set,
                decoder: DecoderConfig::default(),
            });
            // SAFETY: `out` was checked non-null; the caller promised a
            // writable pointer slot.
            unsafe { *out = Box::into_raw(handle) };
            CoderecStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Releases a candidate-set handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn coderec_candidate_set_free(set: *mut CoderecCandidateSet) {
    if !set.is_null() {
        // SAFETY: the pointer came from `Box::into_raw` in
        // `coderec_candidate_set_new` and is released exactly once.
        drop(unsafe { Box::from_raw(set) });
    }
}

/// Number of candidates in the set, or 0 if `set` is null.
#[no_mangle]
pub extern "C" fn coderec_candidate_set_len(set: *const CoderecCandidateSet) -> usize {
    // SAFETY: non-null handles only ever come from `coderec_candidate_set_new`.
    unsafe { set.as_ref() }.map_or(0, |s| s.set.len())
}

/// Side length of the square evidence tensor, or 0 if `set` is null.
#[no_mangle]
pub extern "C" fn coderec_candidate_set_tensor_side(set: *const CoderecCandidateSet) -> usize {
    // SAFETY: as in `coderec_candidate_set_len`.
    unsafe { set.as_ref() }.map_or(0, |s| s.set.tensor_side)
}

/// Copies the NUL-terminated label of candidate `index` into `buf`.
///
/// `buf_len` is the capacity of `buf` in bytes including the terminator;
/// 24 bytes is enough for every default label. Fails with
/// `CODEREC_STATUS_INVALID_ARGUMENT` when the index is out of range or the
/// buffer is too small.
#[no_mangle]
pub extern "C" fn coderec_candidate_set_label(
    set: *const CoderecCandidateSet,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
) -> CoderecStatus {
    // SAFETY: null is rejected; otherwise the handle is live by contract.
    let Some(handle) = (unsafe { set.as_ref() }) else {
        return null_arg("set");
    };
    if buf.is_null() {
        return null_arg("buf");
    }
    let Some(candidate) = handle.set.candidates.get(index) else {
        return fail_with(
            CoderecStatus::InvalidArgument,
            &format!("candidate index {index} out of range for a set of {}", handle.set.len()),
        );
    };
    let label = candidate.label.as_bytes();
    if buf_len < label.len() + 1 {
        return fail_with(
            CoderecStatus::InvalidArgument,
            &format!("label '{}' needs {} bytes, buffer has {buf_len}", candidate.label, label.len() + 1),
        );
    }
    // SAFETY: `buf` holds at least `label.len() + 1` writable bytes, checked
    // above, and the regions cannot overlap (one is library-owned).
    unsafe {
        std::ptr::copy_nonoverlapping(label.as_ptr(), buf.cast::<u8>(), label.len());
        *buf.add(label.len()) = 0;
    }
    CoderecStatus::Ok
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Reconstructs an LLR slice from a raw pointer/length pair.
///
/// # Safety
///
/// `llrs` must point to `llr_len` readable doubles when `llr_len > 0`.
unsafe fn llr_slice<'a>(llrs: *const f64, llr_len: usize) -> Option<&'a [f64]> {
    if llr_len == 0 {
        Some(&[])
    } else if llrs.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(llrs, llr_len))
    }
}

/// Loads trained weights from `weights_path` and binds them to `set`.
///
/// The weight file must have been produced by the library's trainer for the
/// same candidate-set geometry (tensor side and candidate count); anything
/// else fails with `CODEREC_STATUS_INVALID_ARGUMENT`. On success `*out`
/// owns the handle and must be released with [`coderec_classifier_free`];
/// the `set` handle may be freed independently afterwards.
#[no_mangle]
pub extern "C" fn coderec_classifier_new(
    set: *const CoderecCandidateSet,
    weights_path: *const c_char,
    out: *mut *mut CoderecClassifier,
) -> CoderecStatus {
    // SAFETY: null is rejected; otherwise the handle is live by contract.
    let Some(handle) = (unsafe { set.as_ref() }) else {
        return null_arg("set");
    };
    if weights_path.is_null() {
        return null_arg("weights_path");
    }
    if out.is_null() {
        return null_arg("out");
    }
    // SAFETY: `weights_path` is a readable NUL-terminated string by contract.
    let path = match unsafe { CStr::from_ptr(weights_path) }.to_str() {
        Ok(p) => p,
        Err(_) => {
            return fail_with(CoderecStatus::InvalidArgument, "weights_path is not valid UTF-8")
        }
    };
    let network = match load_network(Path::new(path)) {
        Ok((network, _manifest)) => network,
        Err(e) => return fail(&e),
    };
    let expected = handle.set.tensor_side * handle.set.tensor_side * handle.set.len();
    if network.input_len() != expected {
        return fail_with(
            CoderecStatus::InvalidArgument,
            &format!(
                "weights expect {} input values but this candidate set produces {expected}",
                network.input_len()
            ),
        );
    }
    let classifier = Box::new(CoderecClassifier {
        set: handle.set.clone(),
        decoder: handle.decoder.clone(),
        network,
    });
    // SAFETY: `out` was checked non-null above.
    unsafe { *out = Box::into_raw(classifier) };
    CoderecStatus::Ok
}

/// Releases a classifier handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn coderec_classifier_free(classifier: *mut CoderecClassifier) {
    if !classifier.is_null() {
        // SAFETY: the pointer came from `Box::into_raw` in
        // `coderec_classifier_new` and is released exactly once.
        drop(unsafe { Box::from_raw(classifier) });
    }
}

/// Number of classes the classifier separates, or 0 if `classifier` is null.
///
/// This is the length the `probabilities` buffer of [`coderec_classify`]
/// must have, and equals the candidate count of the bound set.
#[no_mangle]
pub extern "C" fn coderec_classifier_class_count(
    classifier: *const CoderecClassifier,
) -> usize {
    // SAFETY: non-null handles only ever come from `coderec_classifier_new`.
    unsafe { classifier.as_ref() }.map_or(0, |c| c.set.len())
}

/// Classifies one received frame of `llr_len` demodulated LLRs.
///
/// Decodes the frame under every candidate, stacks the re-encode agreement
/// evidence, and runs the network. `probabilities`, when non-null, receives
/// one softmax probability per candidate (use
/// [`coderec_classifier_class_count`] to size it); `class_index`, when
/// non-null, receives the argmax. The call is deterministic. Non-finite
/// LLRs fail with `CODEREC_STATUS_INVALID_ARGUMENT`.
#[no_mangle]
pub extern "C" fn coderec_classify(
    classifier: *mut CoderecClassifier,
    llrs: *const f64,
    llr_len: usize,
    probabilities: *mut f64,
    class_index: *mut usize,
) -> CoderecStatus {
    // SAFETY: null is rejected; otherwise the handle is live and uniquely
    // borrowed by contract (handles are not shared across threads).
    let Some(handle) = (unsafe { classifier.as_mut() }) else {
        return null_arg("classifier");
    };
    // SAFETY: the caller promises `llr_len` readable doubles.
    let Some(frame) = (unsafe { llr_slice(llrs, llr_len) }) else {
        return null_arg("llrs");
    };
    let bank = match candidate_evidence(frame, &handle.set, &handle.decoder, EvidenceSource::ReencodeAgreement)
    {
        Ok(bank) => bank,
        Err(e) => return fail(&e),
    };
    let tensor = reshape_stack(&bank);
    let probs = match handle.network.predict_probs(tensor.data(), 1) {
        Ok(probs) => probs,
        Err(e) => return fail(&e),
    };
    if !probabilities.is_null() {
        for (i, &p) in probs.iter().enumerate() {
            // SAFETY: the caller promises `class_count` writable doubles.
            unsafe { *probabilities.add(i) = f64::from(p) };
        }
    }
    if !class_index.is_null() {
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        // SAFETY: checked non-null; one writable usize by contract.
        unsafe { *class_index = best };
    }
    CoderecStatus::Ok
}

/// Classifies one frame with the training-free max-average detector.
///
/// Same decode-and-stack pipeline as [`coderec_classify`], but the decision
/// is the candidate whose evidence plane has the largest mean magnitude
/// over its own codeword length — no weights required. Useful as a
/// reference point and at high SNR.
#[no_mangle]
pub extern "C" fn coderec_baseline_classify(
    set: *const CoderecCandidateSet,
    llrs: *const f64,
    llr_len: usize,
    class_index: *mut usize,
) -> CoderecStatus {
    // SAFETY: null is rejected; otherwise the handle is live by contract.
    let Some(handle) = (unsafe { set.as_ref() }) else {
        return null_arg("set");
    };
    if class_index.is_null() {
        return null_arg("class_index");
    }
    // SAFETY: the caller promises `llr_len` readable doubles.
    let Some(frame) = (unsafe { llr_slice(llrs, llr_len) }) else {
        return null_arg("llrs");
    };
    let bank = match candidate_evidence(frame, &handle.set, &handle.decoder, EvidenceSource::ReencodeAgreement)
    {
        Ok(bank) => bank,
        Err(e) => return fail(&e),
    };
    let tensor = reshape_stack(&bank);
    match baseline_from_tensor(&tensor, &handle.lengths) {
        Ok(best) => {
            // SAFETY: checked non-null; one writable usize by contract.
            unsafe { *class_index = best };
            CoderecStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
