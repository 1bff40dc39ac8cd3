//! Minimal flag parser: subcommand followed by --flag value pairs.

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct Args {
    pub subcommand: String,
    flags: BTreeMap<String, String>,
}

impl Args {
    pub fn parse(argv: &[String]) -> Result<Self, String> {
        let Some(subcommand) = argv.first() else {
            return Err("missing subcommand".into());
        };
        let mut flags = BTreeMap::new();
        let mut i = 1;
        while i < argv.len() {
            let token = &argv[i];
            let Some(name) = token.strip_prefix("--") else {
                return Err(format!("expected a --flag, got {token:?}"));
            };
            let value = argv
                .get(i + 1)
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            if flags.insert(name.to_string(), value.clone()).is_some() {
                return Err(format!("flag --{name} given twice"));
            }
            i += 2;
        }
        Ok(Self { subcommand: subcommand.clone(), flags })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.flags.get(name).map(String::as_str)
    }

    pub fn require(&self, name: &str) -> Result<&str, String> {
        self.get(name).ok_or_else(|| format!("missing required flag --{name}"))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(name) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("flag --{name}: {e}")),
        }
    }

    pub fn known_flags(&self, allowed: &[&str]) -> Result<(), String> {
        for name in self.flags.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(format!("unknown flag --{name} for {}", self.subcommand));
            }
        }
        Ok(())
    }
}
