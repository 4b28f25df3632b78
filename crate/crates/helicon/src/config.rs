//! Key-value configuration file support.
//!
//! Format: one `key = value` pair per line, `#` starts a comment,
//! blank lines ignored. Recognized keys:
//!
//! ```text
//! r, h, alpha, beta           spiral scalars
//! w1 w2 w3, u1 u2 u3          chord weights (major, minor)
//! omega1..3, nu1..3           key weights (major, minor)
//! keywords.melody             comma-separated track-name substrings
//! keywords.bass
//! keywords.harmony
//! change_direction            backward | forward
//! ```

use std::path::Path;

use crate::classify::KeywordTable;
use crate::error::ConfigError;
use crate::spiral::SpiralParams;
use crate::tension::ChangeDirection;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub spiral: SpiralParams,
    pub keywords: KeywordTable,
    pub change_direction: ChangeDirection,
}

impl Config {
    /// Parses configuration text, starting from defaults. Later lines
    /// override earlier ones. Unknown keys are errors, not warnings.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("expected key = value, got {stripped:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value).map_err(|msg| ConfigError::Parse { line, msg })?;
        }
        cfg.spiral.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn number(key: &str, value: &str) -> Result<f64, String> {
            value
                .parse::<f64>()
                .map_err(|_| format!("{key} expects a number, got {value:?}"))
        }
        fn words(value: &str) -> Vec<String> {
            value
                .split(',')
                .map(|w| w.trim().to_ascii_lowercase())
                .filter(|w| !w.is_empty())
                .collect()
        }
        match key {
            "r" => self.spiral.r = number(key, value)?,
            "h" => self.spiral.h = number(key, value)?,
            "alpha" => self.spiral.alpha = number(key, value)?,
            "beta" => self.spiral.beta = number(key, value)?,
            "w1" => self.spiral.w[0] = number(key, value)?,
            "w2" => self.spiral.w[1] = number(key, value)?,
            "w3" => self.spiral.w[2] = number(key, value)?,
            "u1" => self.spiral.u[0] = number(key, value)?,
            "u2" => self.spiral.u[1] = number(key, value)?,
            "u3" => self.spiral.u[2] = number(key, value)?,
            "omega1" => self.spiral.omega[0] = number(key, value)?,
            "omega2" => self.spiral.omega[1] = number(key, value)?,
            "omega3" => self.spiral.omega[2] = number(key, value)?,
            "nu1" => self.spiral.nu[0] = number(key, value)?,
            "nu2" => self.spiral.nu[1] = number(key, value)?,
            "nu3" => self.spiral.nu[2] = number(key, value)?,
            "keywords.melody" => self.keywords.melody = words(value),
            "keywords.bass" => self.keywords.bass = words(value),
            "keywords.harmony" => self.keywords.harmony = words(value),
            "change_direction" => {
                self.change_direction = match value {
                    "backward" => ChangeDirection::Backward,
                    "forward" => ChangeDirection::Forward,
                    other => {
                        return Err(format!(
                            "change_direction expects backward or forward, got {other:?}"
                        ))
                    }
                }
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.change_direction, ChangeDirection::Backward);
    }

    #[test]
    fn parses_overrides_comments_and_blanks() {
        let text = "\
# spiral tweaks
r = 2.0
w1 = 0.5   # trailing comment
w2 = 0.3
w3 = 0.2

keywords.melody = Lead, Solo Line
change_direction = forward
";
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.spiral.r, 2.0);
        assert_eq!(cfg.spiral.w, [0.5, 0.3, 0.2]);
        assert_eq!(cfg.spiral.u, SpiralParams::default().u);
        assert_eq!(cfg.keywords.melody, vec!["lead".to_string(), "solo line".to_string()]);
        assert_eq!(cfg.change_direction, ChangeDirection::Forward);
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let err = Config::parse("r = 1.0\nbogus = 3\n").unwrap_err();
        match err {
            ConfigError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("bogus"));
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn missing_equals_and_bad_number_fail() {
        assert!(matches!(
            Config::parse("just words"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("r = fast"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("change_direction = sideways"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn invalid_spiral_params_rejected_after_parse() {
        let err = Config::parse("r = -1.0").unwrap_err();
        assert!(matches!(err, ConfigError::Spiral(_)));
    }

    #[test]
    fn load_reads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("helicon.conf");
        std::fs::write(&path, "alpha = 0.5\n").unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.spiral.alpha, 0.5);
        assert!(matches!(
            Config::load(&dir.path().join("missing.conf")),
            Err(ConfigError::Io(_))
        ));
    }
}
