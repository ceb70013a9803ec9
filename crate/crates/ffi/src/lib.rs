//! C ABI for the dbviz pipeline. Scenes are opaque handles; strings are
//! heap-allocated and must be released with [`dbviz_string_free`]. Every
//! entry point is thread-safe; the last error message is thread-local.
//!
//! The generated header lives at `include/dbviz.h` (written by the build
//! script via cbindgen).

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;

use dbviz::pipeline::{compile_from_paths, Compiled, PipelineError, PipelineOptions};

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbvizStatus {
    /// The scene compiled and is a faithful representation.
    Ok = 0,
    /// The scene compiled but the faithfulness verdict is negative; the
    /// handle is still valid and the report names the failing clauses.
    Unfaithful = 1,
    /// Spec diagnostics, data violations, or compile errors.
    Diagnostics = 2,
    /// Missing or unreadable files, malformed data.
    IoError = 3,
    /// Null or non-UTF-8 arguments.
    InvalidArgument = 4,
}

/// Opaque compiled scene.
pub struct DbvizScene {
    inner: Compiled,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(err: &PipelineError) -> DbvizStatus {
    match err {
        PipelineError::Spec(_) | PipelineError::Violations(_) | PipelineError::Compile(_) => {
            DbvizStatus::Diagnostics
        }
        PipelineError::Load(_) | PipelineError::Io { .. } => DbvizStatus::IoError,
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, DbvizStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        return Err(DbvizStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        DbvizStatus::InvalidArgument
    })
}

fn to_c_string(bytes: Vec<u8>) -> *mut c_char {
    let sanitized: Vec<u8> = bytes.into_iter().map(|b| if b == 0 { b' ' } else { b }).collect();
    CString::new(sanitized)
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// Compile a spec file against a data directory. On `Ok` or `Unfaithful`,
/// `*out_scene` receives a scene handle the caller must release with
/// [`dbviz_scene_free`]; on any other status it is set to null and
/// [`dbviz_last_error_message`] describes the failure.
///
/// # Safety
/// `spec_path` and `data_dir` must be valid NUL-terminated strings;
/// `out_scene` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dbviz_compile_file(
    spec_path: *const c_char,
    data_dir: *const c_char,
    out_scene: *mut *mut DbvizScene,
) -> DbvizStatus {
    if out_scene.is_null() {
        set_error("out_scene is null".into());
        return DbvizStatus::InvalidArgument;
    }
    *out_scene = std::ptr::null_mut();
    let spec = match utf8_arg(spec_path, "spec_path") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let data = match utf8_arg(data_dir, "data_dir") {
        Ok(s) => s,
        Err(status) => return status,
    };
    clear_error();
    match compile_from_paths(Path::new(spec), Path::new(data), &PipelineOptions::default()) {
        Ok(compiled) => {
            let faithful = compiled.report.faithful;
            *out_scene = Box::into_raw(Box::new(DbvizScene { inner: compiled }));
            if faithful {
                DbvizStatus::Ok
            } else {
                DbvizStatus::Unfaithful
            }
        }
        Err(e) => {
            let status = status_of(&e);
            match &e {
                PipelineError::Spec(diags) => {
                    let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
                    set_error(lines.join("\n"));
                }
                PipelineError::Violations(violations) => {
                    let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                    set_error(lines.join("\n"));
                }
                other => set_error(other.to_string()),
            }
            status
        }
    }
}

/// Whether the compiled scene passed all four faithfulness clauses.
///
/// # Safety
/// `scene` must be a handle returned by [`dbviz_compile_file`], not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn dbviz_scene_faithful(scene: *const DbvizScene) -> bool {
    scene
        .as_ref()
        .map(|s| s.inner.report.faithful)
        .unwrap_or(false)
}

/// Faithfulness report as a JSON string. Free with [`dbviz_string_free`].
/// Returns null on a null handle.
///
/// # Safety
/// `scene` must be a live handle from [`dbviz_compile_file`].
#[no_mangle]
pub unsafe extern "C" fn dbviz_scene_report_json(scene: *const DbvizScene) -> *mut c_char {
    match scene.as_ref() {
        Some(s) => to_c_string(s.inner.report_json()),
        None => std::ptr::null_mut(),
    }
}

/// Rendered SVG document. Free with [`dbviz_string_free`]. Returns null on
/// a null handle or a render error (see [`dbviz_last_error_message`]).
///
/// # Safety
/// `scene` must be a live handle from [`dbviz_compile_file`].
#[no_mangle]
pub unsafe extern "C" fn dbviz_scene_svg(scene: *const DbvizScene) -> *mut c_char {
    match scene.as_ref() {
        Some(s) => match s.inner.render_svg() {
            Ok(svg) => to_c_string(svg),
            Err(e) => {
                set_error(e.to_string());
                std::ptr::null_mut()
            }
        },
        None => std::ptr::null_mut(),
    }
}

/// Mark tables as a JSON string. Free with [`dbviz_string_free`]. Returns
/// null on a null handle.
///
/// # Safety
/// `scene` must be a live handle from [`dbviz_compile_file`].
#[no_mangle]
pub unsafe extern "C" fn dbviz_scene_marks_json(scene: *const DbvizScene) -> *mut c_char {
    match scene.as_ref() {
        Some(s) => to_c_string(s.inner.marks_json()),
        None => std::ptr::null_mut(),
    }
}

/// Message for the most recent failure on this thread, or null if none.
/// Free with [`dbviz_string_free`].
#[no_mangle]
pub extern "C" fn dbviz_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by a dbviz function, not yet
/// freed; null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn dbviz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a scene handle.
///
/// # Safety
/// `scene` must be a handle returned by [`dbviz_compile_file`], not yet
/// freed; null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn dbviz_scene_free(scene: *mut DbvizScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}
