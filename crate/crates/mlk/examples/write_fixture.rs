//! Regenerates `tests/fixtures/diabetes` from the demo fixture.

use std::path::Path;

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/diabetes");
    if root.exists() {
        std::fs::remove_dir_all(&root)?;
    }
    for (rel, bytes) in mlk::fixture_files::diabetes_files() {
        let path = root.join(rel);
        std::fs::create_dir_all(path.parent().expect("files live in a directory"))?;
        std::fs::write(&path, bytes)?;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(root.join("load.sh"), std::fs::Permissions::from_mode(0o755))?;
    }
    println!("wrote {}", root.display());
    Ok(())
}
