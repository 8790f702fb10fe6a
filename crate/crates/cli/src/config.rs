//! TOML run configuration. Every flag has a counterpart here; flags win.

use std::fmt;
use std::path::{Path, PathBuf};

use airq_core::es::EsVariant;
use airq_core::harness::{
    EsForecaster, LstmForecaster, RollingSpec, SarimaForecaster, DEFAULT_WINDOW_COUNT,
    ES_CANDIDATES, SARIMA_CANDIDATES,
};
use airq_core::lstm::{LstmHyperParams, NetworkConfig, NetworkKind};
use airq_core::sarima::{OrderBounds, SarimaOrder};
use airq_core::synth::SynthSpec;
use airq_core::MAX_HORIZON;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub rolling: RollingSection,
    pub synth: Option<SynthSection>,
    pub es: EsSection,
    pub sarima: SarimaSection,
    pub lstm: LstmSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingSection {
    pub horizon: Option<usize>,
    pub windows: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub hours: Option<usize>,
    pub base: Option<f64>,
    pub diurnal_amp: Option<f64>,
    pub weekly_amp: Option<f64>,
    pub ar_coeff: Option<f64>,
    pub noise_sd: Option<f64>,
    pub missing_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsSection {
    /// simple, holt or holt_winters
    pub variant: Option<String>,
    pub train_len: Option<usize>,
    pub candidates: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarimaSection {
    pub train_len: Option<usize>,
    pub candidates: Option<Vec<usize>>,
    /// Fixed `[p, d, q, P, D, Q]`; skips the order search.
    pub order: Option<[usize; 6]>,
    pub bounds: Option<OrderBounds>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct LstmSection {
    /// simple, stacked, bidirectional or encoder_decoder
    pub network: Option<String>,
    pub retrain: Option<bool>,
    pub candidates: Option<Vec<usize>>,
    #[serde(flatten)]
    pub hyper: LstmHyperParams,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Es,
    Sarima,
    Lstm,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "es" => Ok(Method::Es),
            "arima" | "sarima" => Ok(Method::Sarima),
            "lstm" => Ok(Method::Lstm),
            other => Err(CliError::Usage(format!(
                "unknown method '{other}' (expected es, arima or lstm)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Es => "es",
            Method::Sarima => "arima",
            Method::Lstm => "lstm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Input(PathBuf),
    Synth(SynthSpec),
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    pub rolling: RollingSpec,
    pub es: EsForecaster,
    pub es_candidates: Vec<usize>,
    pub sarima: SarimaForecaster,
    pub sarima_candidates: Vec<usize>,
    pub lstm: LstmForecaster,
    pub lstm_candidates: Vec<usize>,
}

impl RunConfig {
    pub fn candidates(&self, m: Method) -> &[usize] {
        match m {
            Method::Es => &self.es_candidates,
            Method::Sarima => &self.sarima_candidates,
            Method::Lstm => &self.lstm_candidates,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub hours: Option<usize>,
    pub missing_rate: Option<f64>,
    pub horizon: Option<usize>,
    pub windows: Option<usize>,
    pub stride: Option<usize>,
}

fn es_variant(name: &str) -> Result<EsVariant, CliError> {
    match name {
        "simple" => Ok(EsVariant::simple()),
        "holt" => Ok(EsVariant::holt()),
        "holt_winters" | "hw" => Ok(EsVariant::holt_winters()),
        other => Err(CliError::Usage(format!(
            "unknown ES variant '{other}' (expected simple, holt or holt_winters)"
        ))),
    }
}

fn network_kind(name: &str) -> Result<NetworkKind, CliError> {
    match name {
        "simple" => Ok(NetworkKind::Simple),
        "stacked" => Ok(NetworkKind::Stacked),
        "bidirectional" => Ok(NetworkKind::Bidirectional),
        "encoder_decoder" => Ok(NetworkKind::EncoderDecoder),
        other => Err(CliError::Usage(format!("unknown LSTM network '{other}'"))),
    }
}

fn synth_spec(section: Option<&SynthSection>, seed: u64, o: &Overrides) -> SynthSpec {
    let d = SynthSpec::default();
    let s = section.copied().unwrap_or_default();
    SynthSpec {
        hours: o.hours.or(s.hours).unwrap_or(d.hours),
        base: s.base.unwrap_or(d.base),
        diurnal_amp: s.diurnal_amp.unwrap_or(d.diurnal_amp),
        weekly_amp: s.weekly_amp.unwrap_or(d.weekly_amp),
        ar_coeff: s.ar_coeff.unwrap_or(d.ar_coeff),
        noise_sd: s.noise_sd.unwrap_or(d.noise_sd),
        missing_rate: o.missing_rate.or(s.missing_rate).unwrap_or(d.missing_rate),
        seed,
        start_hour: d.start_hour,
    }
}

fn check_candidates(name: &str, list: Vec<usize>) -> Result<Vec<usize>, CliError> {
    if list.is_empty() || list.contains(&0) {
        return Err(CliError::Usage(format!(
            "{name} candidates must be a non-empty list of positive hours"
        )));
    }
    Ok(list)
}

impl RunConfig {
    pub fn resolve(file: FileConfig, o: Overrides) -> Result<Self, CliError> {
        let seed = o.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let synth_flags = o.hours.is_some() || o.missing_rate.is_some();
        let both = || {
            CliError::Usage(
                "give either an input file or synthetic-series settings, not both".into(),
            )
        };
        let source = match (o.input.clone(), synth_flags) {
            (Some(_), true) => return Err(both()),
            (Some(path), false) => Source::Input(path),
            (None, true) => Source::Synth(synth_spec(file.synth.as_ref(), seed, &o)),
            (None, false) => match (file.input, file.synth.is_some()) {
                (Some(_), true) => return Err(both()),
                (Some(path), false) => Source::Input(path),
                (None, _) => Source::Synth(synth_spec(file.synth.as_ref(), seed, &o)),
            },
        };

        let rolling = RollingSpec {
            train_len: 1,
            horizon: o.horizon.or(file.rolling.horizon).unwrap_or(MAX_HORIZON),
            stride: o.stride.or(file.rolling.stride).unwrap_or(1),
            window_count: o
                .windows
                .or(file.rolling.windows)
                .unwrap_or(DEFAULT_WINDOW_COUNT),
            seed,
        };
        rolling.validate()?;

        let mut es = EsForecaster::default();
        if let Some(v) = &file.es.variant {
            es.variant = es_variant(v)?;
        }
        if let Some(len) = file.es.train_len {
            es.train_len = len;
        }

        let mut sarima = SarimaForecaster::default();
        match (file.sarima.order, file.sarima.bounds) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "sarima: give order or bounds, not both".into(),
                ))
            }
            (Some([p, d, q, sp, sd, sq]), None) => {
                sarima.bounds = OrderBounds::single(SarimaOrder::new((p, d, q), (sp, sd, sq)))
            }
            (None, Some(b)) => sarima.bounds = b,
            (None, None) => {}
        }
        sarima.bounds.validate()?;
        if let Some(len) = file.sarima.train_len {
            sarima.train_len = len;
        }

        let lstm = LstmForecaster {
            network: NetworkConfig::new(match &file.lstm.network {
                Some(n) => network_kind(n)?,
                None => NetworkKind::Simple,
            }),
            hyper: file.lstm.hyper.clone(),
            retrain: file.lstm.retrain.unwrap_or(false),
        };
        lstm.hyper.validate()?;

        Ok(Self {
            source,
            out_dir: o
                .out_dir
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            jobs: o.jobs.or(file.jobs),
            rolling,
            es_candidates: check_candidates(
                "es",
                file.es.candidates.unwrap_or(ES_CANDIDATES.to_vec()),
            )?,
            sarima_candidates: check_candidates(
                "sarima",
                file.sarima.candidates.unwrap_or(SARIMA_CANDIDATES.to_vec()),
            )?,
            lstm_candidates: check_candidates(
                "lstm",
                file.lstm.candidates.unwrap_or(vec![lstm.hyper.train_size]),
            )?,
            es,
            sarima,
            lstm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> FileConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_without_a_file() {
        let c = RunConfig::resolve(FileConfig::default(), Overrides::default()).unwrap();
        assert_eq!(c.rolling.seed, DEFAULT_SEED);
        assert_eq!(c.rolling.window_count, 48);
        assert_eq!(c.rolling.horizon, 24);
        assert_eq!(c.es.train_len, 96);
        assert_eq!(c.sarima.train_len, 120);
        assert_eq!(c.lstm.hyper, LstmHyperParams::default());
        assert_eq!(c.es_candidates, ES_CANDIDATES);
        match c.source {
            Source::Synth(s) => {
                assert_eq!(s.hours, 20_000);
                assert_eq!(s.seed, 42);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_values_apply_and_flags_override() {
        let file = parse(
            r#"
            seed = 7
            jobs = 2
            [rolling]
            windows = 5
            horizon = 12
            [synth]
            hours = 500
            noise_sd = 1.5
            [es]
            variant = "holt"
            train_len = 72
            [sarima]
            order = [1, 0, 1, 0, 1, 0]
            [lstm]
            network = "stacked"
            epochs_max = 3
            window_len = 6
            "#,
        );
        let c = RunConfig::resolve(
            file,
            Overrides {
                seed: Some(9),
                windows: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.rolling.seed, 9);
        assert_eq!(c.jobs, Some(2));
        assert_eq!(c.rolling.window_count, 3);
        assert_eq!(c.rolling.horizon, 12);
        assert_eq!(c.es.variant, EsVariant::holt());
        assert_eq!(c.es.train_len, 72);
        assert_eq!(
            c.sarima.bounds.single_order(),
            Some(SarimaOrder::new((1, 0, 1), (0, 1, 0)))
        );
        assert_eq!(c.lstm.network.kind, NetworkKind::Stacked);
        assert_eq!(c.lstm.hyper.epochs_max, 3);
        assert_eq!(c.lstm.hyper.window_len, 6);
        assert_eq!(c.lstm.hyper.batch_size, 12);
        match c.source {
            Source::Synth(s) => {
                assert_eq!((s.hours, s.noise_sd, s.seed), (500, 1.5, 9));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_conflicts_and_unknowns() {
        let both = RunConfig::resolve(
            parse("input = \"a.csv\"\n[synth]\nhours = 10\n"),
            Overrides::default(),
        );
        assert!(matches!(both, Err(CliError::Usage(_))));
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
        assert!(
            RunConfig::resolve(parse("[es]\nvariant = \"x\"\n"), Overrides::default()).is_err()
        );
        let wide = parse("[sarima.bounds]\np = [0, 9]\nd = [0, 1]\nq = [0, 1]\nseasonal_p = [0, 1]\nseasonal_d = [0, 1]\nseasonal_q = [0, 1]\n");
        assert!(RunConfig::resolve(wide, Overrides::default()).is_err());
        assert!(Method::parse("prophet").is_err());
        assert_eq!(Method::parse("ARIMA").unwrap(), Method::Sarima);
    }
}
