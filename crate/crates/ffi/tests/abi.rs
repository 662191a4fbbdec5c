use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use textlab_core::planner::plan;
use textlab_core::tasks::Catalog;
use textlab_ffi::*;

fn read(f: impl Fn(*mut c_char, usize, *mut usize) -> TlStatus) -> String {
    let mut needed = 0usize;
    assert_eq!(f(ptr::null_mut(), 0, &mut needed), TlStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        f(buf.as_mut_ptr(), buf.len(), ptr::null_mut()),
        TlStatus::Ok
    );
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn gold_path_through_the_c_interface() {
    unsafe {
        let mut catalog = ptr::null_mut();
        assert_eq!(tl_catalog_new(4, &mut catalog), TlStatus::Ok);
        let mut len = 0;
        assert_eq!(tl_catalog_len(catalog, &mut len), TlStatus::Ok);
        let variations = Catalog::builtin().generate(4, &Default::default()).unwrap();
        assert_eq!(len, variations.len());

        let target = variations
            .iter()
            .find(|v| v.task == "use-thermometer")
            .unwrap();
        let index = variations.iter().position(|v| v.id == target.id).unwrap();
        let id = read(|b, c, n| tl_catalog_variation_id(catalog, index, b, c, n));
        assert_eq!(id, target.id);

        let mut episode = ptr::null_mut();
        let cid = CString::new(id).unwrap();
        assert_eq!(
            tl_episode_new(catalog, cid.as_ptr(), false, &mut episode),
            TlStatus::Ok
        );
        assert_eq!(
            read(|b, c, n| tl_episode_description(episode, b, c, n)),
            target.description
        );
        assert!(read(|b, c, n| tl_episode_observation(episode, b, c, n))
            .starts_with("This room is called the"));

        let gold = plan(target).unwrap().remove(0);
        let mut state = TlEpisodeState::default();
        for action in &gold.actions {
            let a = CString::new(action.as_str()).unwrap();
            assert_eq!(
                tl_episode_step(episode, a.as_ptr(), &mut state),
                TlStatus::Ok
            );
        }
        assert!(state.won && state.finished);
        assert_eq!(state.score, 100);
        assert_eq!(state.env_steps, gold.actions.len());
        let wait = CString::new("wait").unwrap();
        assert_eq!(
            tl_episode_step(episode, wait.as_ptr(), &mut state),
            TlStatus::Finished
        );

        let prompt = read(|b, c, n| tl_episode_prompt(episode, 2048, false, b, c, n));
        assert!(prompt.starts_with(&target.description) && prompt.ends_with("A:"));

        tl_episode_free(episode);
        tl_catalog_free(catalog);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        assert_eq!(tl_catalog_new(0, ptr::null_mut()), TlStatus::NullArgument);
        let mut catalog = ptr::null_mut();
        assert_eq!(tl_catalog_new(0, &mut catalog), TlStatus::Ok);
        let bogus = CString::new("melting-999").unwrap();
        let mut episode = ptr::null_mut();
        assert_eq!(
            tl_episode_new(catalog, bogus.as_ptr(), false, &mut episode),
            TlStatus::NotFound
        );
        assert!(episode.is_null());
        assert!(read(|b, c, n| tl_last_error(b, c, n)).contains("melting-999"));
        let bad_utf8 = [0xffu8 as c_char, 0];
        assert_eq!(
            tl_episode_new(catalog, bad_utf8.as_ptr(), false, &mut episode),
            TlStatus::InvalidUtf8
        );
        let mut buf = [0 as c_char; 8];
        assert_eq!(
            tl_catalog_variation_id(catalog, usize::MAX, buf.as_mut_ptr(), 8, ptr::null_mut()),
            TlStatus::NotFound
        );
        tl_catalog_free(catalog);
        tl_catalog_free(ptr::null_mut());
        tl_episode_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_interface() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/textlab.h")).unwrap();
    for name in [
        "tl_catalog_new",
        "tl_catalog_free",
        "tl_episode_new",
        "tl_episode_step",
        "tl_episode_prompt",
        "tl_last_error",
        "typedef struct TlEpisode TlEpisode",
        "TL_STATUS_BUFFER_TOO_SMALL = 6",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles the C smoke program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libtextlab_ffi.a");
    assert!(
        lib.exists(),
        "static library not built at {}",
        lib.display()
    );
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile_path("textlab_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("a C compiler");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}
