use stlrelax::scenario::{builtin, BUILTIN_NAMES};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "scenarios".into());
    for name in BUILTIN_NAMES {
        let path = std::path::Path::new(&dir).join(format!("{name}.json"));
        builtin(name).unwrap().save(&path).unwrap();
        println!("wrote {}", path.display());
    }
}
