//! Regenerates include/coulomb_gas.h from the exported items. The header is
//! committed; the build only rewrites it when the interface actually changed,
//! so downstream C builds can vendor the file without running cargo.

use std::path::Path;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(Path::new(&crate_dir).join("cbindgen.toml"))
        .expect("cbindgen.toml parses");
    let header = match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(h) => h,
        // parsing can fail mid-edit; keep the committed header in that case
        Err(e) => {
            println!("cargo:warning=header not regenerated: {e}");
            return;
        }
    };
    let mut text = Vec::new();
    header.write(&mut text);
    let out = Path::new(&crate_dir).join("include/coulomb_gas.h");
    if std::fs::read(&out).ok().as_deref() != Some(text.as_slice()) {
        std::fs::write(&out, &text).expect("write include/coulomb_gas.h");
    }
}
