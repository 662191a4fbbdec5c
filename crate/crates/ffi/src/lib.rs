//! C ABI over the task catalog and interactive episodes.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a [`TlStatus`];
//! the message of the last failure on the calling thread is available via
//! [`tl_last_error`]. Strings go out through caller buffers: when the
//! buffer is too small the call returns `TL_STATUS_BUFFER_TOO_SMALL` and
//! still reports the size needed, terminator included.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use textlab_core::eval::{Session, SessionOptions};
use textlab_core::tasks::{Catalog, TaskVariation};
use textlab_core::transcript::{pack_transcript, HistoryMode, TokenBudget};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    InvalidArgument = 4,
    Finished = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Generated task variations for one master seed.
pub struct TlCatalog {
    variations: Vec<TaskVariation>,
}

/// One game in progress.
pub struct TlEpisode {
    session: Session,
    last_observation: String,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TlEpisodeState {
    pub score: u32,
    pub env_steps: usize,
    pub won: bool,
    pub lost: bool,
    pub finished: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: TlStatus, message: impl Into<String>) -> TlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn guarded(body: impl FnOnce() -> TlStatus) -> TlStatus {
    catch_unwind(AssertUnwindSafe(body))
        .unwrap_or_else(|_| fail(TlStatus::Internal, "panic inside textlab"))
}

unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, TlStatus> {
    if text.is_null() {
        return Err(fail(TlStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| fail(TlStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Copies `text` plus a terminator into `buf`. Leaves the last error alone
/// so [`tl_last_error`] can use it too.
unsafe fn write_str(text: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> TlStatus {
    let size = text.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if text.as_bytes().contains(&0) {
        return TlStatus::Internal;
    }
    if buf.is_null() || cap < size {
        return TlStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    TlStatus::Ok
}

fn state_of(session: &Session) -> TlEpisodeState {
    TlEpisodeState {
        score: session.score(),
        env_steps: session.env_steps(),
        won: session.won(),
        lost: session.failed(),
        finished: session.finished(),
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn tl_status_name(status: TlStatus) -> *const c_char {
    let name: &'static CStr = match status {
        TlStatus::Ok => c"ok",
        TlStatus::NullArgument => c"null argument",
        TlStatus::InvalidUtf8 => c"invalid utf-8",
        TlStatus::NotFound => c"not found",
        TlStatus::InvalidArgument => c"invalid argument",
        TlStatus::Finished => c"episode finished",
        TlStatus::BufferTooSmall => c"buffer too small",
        TlStatus::Internal => c"internal error",
    };
    name.as_ptr()
}

/// Message of the last failed call on this thread.
///
/// # Safety
/// `buf` must hold `cap` bytes (or be null); `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn tl_last_error(
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TlStatus {
    let message = LAST_ERROR.with(|e| e.borrow().clone());
    write_str(&message, buf, cap, needed)
}

/// Builds the default catalog for `seed`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_catalog_new(seed: u64, out: *mut *mut TlCatalog) -> TlStatus {
    guarded(|| {
        if out.is_null() {
            return fail(TlStatus::NullArgument, "null output handle");
        }
        match Catalog::builtin().generate(seed, &BTreeMap::new()) {
            Ok(variations) => {
                *out = Box::into_raw(Box::new(TlCatalog { variations }));
                TlStatus::Ok
            }
            Err(e) => fail(TlStatus::Internal, e.to_string()),
        }
    })
}

/// # Safety
/// `catalog` must come from [`tl_catalog_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_catalog_free(catalog: *mut TlCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_catalog_len(catalog: *const TlCatalog, out: *mut usize) -> TlStatus {
    if catalog.is_null() || out.is_null() {
        return fail(TlStatus::NullArgument, "null argument");
    }
    *out = (&*catalog).variations.len();
    TlStatus::Ok
}

/// Id of the variation at `index` (catalog order).
///
/// # Safety
/// `catalog` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn tl_catalog_variation_id(
    catalog: *const TlCatalog,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TlStatus {
    if catalog.is_null() {
        return fail(TlStatus::NullArgument, "null catalog");
    }
    match (&*catalog).variations.get(index) {
        Some(v) => write_str(&v.id, buf, cap, needed),
        None => fail(TlStatus::NotFound, format!("no variation at index {index}")),
    }
}

/// Starts an episode of `variation_id`. The opening observation is
/// available through [`tl_episode_observation`].
///
/// # Safety
/// `catalog` and `variation_id` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_new(
    catalog: *const TlCatalog,
    variation_id: *const c_char,
    preconditions: bool,
    out: *mut *mut TlEpisode,
) -> TlStatus {
    guarded(|| {
        if catalog.is_null() || out.is_null() {
            return fail(TlStatus::NullArgument, "null argument");
        }
        let id = match read_str(variation_id) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let Some(variation) = (&*catalog).variations.iter().find(|v| v.id == id) else {
            return fail(TlStatus::NotFound, format!("unknown variation {id}"));
        };
        let session = Session::new(
            variation,
            SessionOptions {
                guard: preconditions,
                ..SessionOptions::default()
            },
        );
        let last_observation = session.opening().to_string();
        *out = Box::into_raw(Box::new(TlEpisode {
            session,
            last_observation,
        }));
        TlStatus::Ok
    })
}

/// # Safety
/// `episode` must come from [`tl_episode_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_free(episode: *mut TlEpisode) {
    if !episode.is_null() {
        drop(Box::from_raw(episode));
    }
}

/// Task description of the episode.
///
/// # Safety
/// `episode` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_description(
    episode: *const TlEpisode,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TlStatus {
    if episode.is_null() {
        return fail(TlStatus::NullArgument, "null episode");
    }
    write_str(
        &(*episode).session.variation().description,
        buf,
        cap,
        needed,
    )
}

/// Plays one action. Returns `TL_STATUS_FINISHED` without acting once the
/// game is won or lost.
///
/// # Safety
/// `episode` and `action` must be valid; `state` may be null.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_step(
    episode: *mut TlEpisode,
    action: *const c_char,
    state: *mut TlEpisodeState,
) -> TlStatus {
    guarded(|| {
        if episode.is_null() {
            return fail(TlStatus::NullArgument, "null episode");
        }
        let action = match read_str(action) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let episode = &mut *episode;
        if episode.session.finished() {
            return fail(TlStatus::Finished, "episode already finished");
        }
        episode.last_observation = episode.session.act(action).observation.clone();
        if !state.is_null() {
            *state = state_of(&episode.session);
        }
        TlStatus::Ok
    })
}

/// Observation produced by the latest step (or the opening look).
///
/// # Safety
/// `episode` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_observation(
    episode: *const TlEpisode,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TlStatus {
    if episode.is_null() {
        return fail(TlStatus::NullArgument, "null episode");
    }
    write_str(&(*episode).last_observation, buf, cap, needed)
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_state(
    episode: *const TlEpisode,
    state: *mut TlEpisodeState,
) -> TlStatus {
    if episode.is_null() || state.is_null() {
        return fail(TlStatus::NullArgument, "null argument");
    }
    *state = state_of(&(*episode).session);
    TlStatus::Ok
}

/// Packed prompt for the next action under a word-piece budget, ending
/// with the action cue.
///
/// # Safety
/// `episode` must be valid; `buf` must hold `cap` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn tl_episode_prompt(
    episode: *const TlEpisode,
    budget: usize,
    markov: bool,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TlStatus {
    guarded(|| {
        if episode.is_null() {
            return fail(TlStatus::NullArgument, "null episode");
        }
        let mode = if markov {
            HistoryMode::Markov
        } else {
            HistoryMode::FullHistory
        };
        match pack_transcript(
            (*episode).session.transcript(),
            &TokenBudget::new(budget),
            mode,
        ) {
            Ok(packed) => write_str(&packed.text, buf, cap, needed),
            Err(e) => fail(TlStatus::InvalidArgument, e.to_string()),
        }
    })
}
