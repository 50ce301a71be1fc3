//! Run configuration: one flat `key=value` text file drives every command.
//! Lines may carry `#` comments; unknown or duplicate keys are rejected so
//! typos fail loudly.

use crate::cluster::MeanShiftConfig;
use crate::data_io::SceneSpec;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::{CfsmMode, ModelConfig};
use std::collections::BTreeMap;

/// Training/inference variant. Besides selecting the active gate units it
/// fixes the embedding-balance policy: only `3dcfs` trains with the
/// equilibrium term, and only `cfsm_post` centers embeddings at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Independent branches, no coupling.
    Baseline,
    /// Instance features gated into the semantic branch only.
    CiS,
    /// Semantic features gated into the instance branch only.
    CsI,
    /// Both coupling directions.
    Cfsm,
    /// Both directions plus mean removal as an inference post-process.
    CfsmPost,
    /// Both directions plus the equilibrium loss during training.
    ThreeDCfs,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Baseline,
        Variant::CiS,
        Variant::CsI,
        Variant::Cfsm,
        Variant::CfsmPost,
        Variant::ThreeDCfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::CiS => "ci_s",
            Variant::CsI => "cs_i",
            Variant::Cfsm => "cfsm",
            Variant::CfsmPost => "cfsm_post",
            Variant::ThreeDCfs => "3dcfs",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant {name:?}, expected one of {names:?}"))
            })
    }

    pub fn cfsm_mode(self) -> CfsmMode {
        match self {
            Variant::Baseline => CfsmMode::None,
            Variant::CiS => CfsmMode::CiSOnly,
            Variant::CsI => CfsmMode::CsIOnly,
            Variant::Cfsm | Variant::CfsmPost | Variant::ThreeDCfs => CfsmMode::Both,
        }
    }

    /// Whether inference should center embeddings before clustering.
    pub fn mean_removal_at_inference(self) -> bool {
        self == Variant::CfsmPost
    }

    /// Whether training keeps a nonzero equilibrium weight.
    pub fn trains_equilibrium(self) -> bool {
        self == Variant::ThreeDCfs
    }
}

/// Everything a run needs, with desk-scale defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub weights: LossWeights,
    pub cluster: MeanShiftConfig,
    pub variant: Variant,
    /// XY block edge length, meters.
    pub block_size: f64,
    /// Block stride, meters.
    pub stride: f64,
    /// Merge-grid voxel edge, meters.
    pub merge_cell: f64,
    /// Fraction of an instance's cells an existing id must cover to be adopted.
    pub merge_threshold: f64,
    pub lr: f64,
    /// The learning rate halves every this many optimizer steps.
    pub decay_steps: usize,
    pub epochs: usize,
    /// Blocks whose gradients are averaged per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    /// Scene recipe for the `gen` command (its `seed` is derived per scene
    /// from the run seed).
    pub scene: SceneSpec,
    /// How many scenes `gen` writes.
    pub gen_scenes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig {
                l_p: 512,
                d_in: 9,
                l_f: 64,
                l_c: 4,
                l_e: 5,
                encoder_widths: vec![64, 128, 128],
                cfsm: Variant::ThreeDCfs.cfsm_mode(),
            },
            weights: LossWeights::default(),
            cluster: MeanShiftConfig::default(),
            variant: Variant::ThreeDCfs,
            block_size: 1.0,
            stride: 0.5,
            merge_cell: 0.1,
            merge_threshold: 0.3,
            lr: 0.001,
            decay_steps: 2000,
            epochs: 30,
            batch_size: 1,
            seed: 0,
            scene: SceneSpec::default(),
            gen_scenes: 8,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Config(format!("key {key}: bad value {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, arity: Option<usize>) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = value.split(',').map(|v| parse_num(key, v.trim())).collect();
    let items = items?;
    if let Some(n) = arity {
        if items.len() != n {
            return Err(Error::Config(format!(
                "key {key}: expected {n} comma-separated values, got {}",
                items.len()
            )));
        }
    }
    Ok(items)
}

fn parse_pair<T: std::str::FromStr + Copy>(key: &str, value: &str) -> Result<(T, T)>
where
    T::Err: std::fmt::Display,
{
    let v = parse_list::<T>(key, value, Some(2))?;
    Ok((v[0], v[1]))
}

impl RunConfig {
    /// Parses `key=value` text over the defaults, applies the variant's
    /// mode/alpha policy, and validates.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut entries: BTreeMap<&str, &str> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key=value, got {raw:?}", no + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if entries.insert(key, value).is_some() {
                return Err(Error::Config(format!("config line {}: duplicate key {key}", no + 1)));
            }
        }

        let mut cfg = RunConfig::default();
        let mut explicit_shift_tol = None;
        let mut explicit_merge_radius = None;
        for (key, value) in entries {
            match key {
                "variant" => cfg.variant = Variant::from_name(value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "epochs" => cfg.epochs = parse_num(key, value)?,
                "batch_size" => cfg.batch_size = parse_num(key, value)?,
                "lr" => cfg.lr = parse_num(key, value)?,
                "decay_steps" => cfg.decay_steps = parse_num(key, value)?,
                "l_p" => cfg.model.l_p = parse_num(key, value)?,
                "d_in" => cfg.model.d_in = parse_num(key, value)?,
                "l_f" => cfg.model.l_f = parse_num(key, value)?,
                "l_c" => cfg.model.l_c = parse_num(key, value)?,
                "l_e" => cfg.model.l_e = parse_num(key, value)?,
                "encoder_widths" => cfg.model.encoder_widths = parse_list(key, value, None)?,
                "semantic_weight" => cfg.weights.semantic_weight = parse_num(key, value)?,
                "alpha" => cfg.weights.alpha = parse_num(key, value)?,
                "lambda_reg" => cfg.weights.lambda_reg = parse_num(key, value)?,
                "delta_v" => cfg.weights.delta_v = parse_num(key, value)?,
                "delta_d" => cfg.weights.delta_d = parse_num(key, value)?,
                "bandwidth" => cfg.cluster.bandwidth = parse_num(key, value)?,
                "max_iters" => cfg.cluster.max_iters = parse_num(key, value)?,
                "shift_tol" => explicit_shift_tol = Some(parse_num(key, value)?),
                "merge_radius" => explicit_merge_radius = Some(parse_num(key, value)?),
                "block_size" => cfg.block_size = parse_num(key, value)?,
                "stride" => cfg.stride = parse_num(key, value)?,
                "merge_cell" => cfg.merge_cell = parse_num(key, value)?,
                "merge_threshold" => cfg.merge_threshold = parse_num(key, value)?,
                "gen_scenes" => cfg.gen_scenes = parse_num(key, value)?,
                "gen_extent" => {
                    let v = parse_list::<f64>(key, value, Some(3))?;
                    cfg.scene.extent = [v[0], v[1], v[2]];
                }
                "gen_objects" => cfg.scene.object_count = parse_pair(key, value)?,
                "gen_object_size" => cfg.scene.object_size = parse_pair(key, value)?,
                "gen_points_per_object" => cfg.scene.points_per_object = parse_pair(key, value)?,
                "gen_noise_sigma" => cfg.scene.noise_sigma = parse_num(key, value)?,
                "gen_shared_object_color" => {
                    cfg.scene.shared_object_color = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(Error::Config(format!(
                                "{key}: expected true or false, got {other:?}"
                            )));
                        }
                    }
                }
                other => {
                    return Err(Error::Config(format!("unknown config key {other:?}")));
                }
            }
        }
        // Clustering tolerances track the bandwidth unless pinned explicitly.
        cfg.cluster.shift_tol = explicit_shift_tol.unwrap_or(1e-3 * cfg.cluster.bandwidth);
        cfg.cluster.merge_radius = explicit_merge_radius.unwrap_or(cfg.cluster.bandwidth);
        cfg.apply_variant();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Derives the gate mode from the variant and zeroes alpha for every
    /// variant that does not train the equilibrium term.
    fn apply_variant(&mut self) {
        self.model.cfsm = self.variant.cfsm_mode();
        if !self.variant.trains_equilibrium() {
            self.weights.alpha = 0.0;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.weights.validate()?;
        self.cluster.validate()?;
        self.scene.validate()?;
        if !(self.block_size > 0.0) || !(self.stride > 0.0) || self.stride > self.block_size {
            return Err(Error::Config(format!(
                "block size {} / stride {} invalid (need 0 < stride ≤ size)",
                self.block_size, self.stride
            )));
        }
        if !(self.merge_cell > 0.0) {
            return Err(Error::Config(format!("merge cell {} must be > 0", self.merge_cell)));
        }
        if !(0.0..=1.0).contains(&self.merge_threshold) {
            return Err(Error::Config(format!(
                "merge threshold {} must lie in [0,1]",
                self.merge_threshold
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.lr)));
        }
        if self.decay_steps == 0 || self.epochs == 0 || self.batch_size == 0 || self.gen_scenes == 0
        {
            return Err(Error::Config(
                "decay_steps, epochs, batch_size, and gen_scenes must be ≥ 1".into(),
            ));
        }
        if self.variant.trains_equilibrium() && !(self.weights.alpha > 0.0) {
            return Err(Error::Config(format!(
                "variant 3dcfs requires alpha > 0, got {}",
                self.weights.alpha
            )));
        }
        if self.model.cfsm != self.variant.cfsm_mode() {
            return Err(Error::Config(
                "gate mode does not match the variant (use RunConfig::parse)".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c` and the float
    /// formatting round-trips exactly.
    pub fn serialize(&self) -> String {
        let widths: Vec<String> = self.model.encoder_widths.iter().map(|w| w.to_string()).collect();
        format!(
            "variant={}\nseed={}\nepochs={}\nbatch_size={}\nlr={}\ndecay_steps={}\n\
             l_p={}\nd_in={}\nl_f={}\nl_c={}\nl_e={}\nencoder_widths={}\n\
             semantic_weight={}\nalpha={}\nlambda_reg={}\ndelta_v={}\ndelta_d={}\n\
             bandwidth={}\nmax_iters={}\nshift_tol={}\nmerge_radius={}\n\
             block_size={}\nstride={}\nmerge_cell={}\nmerge_threshold={}\n\
             gen_scenes={}\ngen_extent={},{},{}\ngen_objects={},{}\ngen_object_size={},{}\n\
             gen_points_per_object={},{}\ngen_noise_sigma={}\ngen_shared_object_color={}\n",
            self.variant.name(),
            self.seed,
            self.epochs,
            self.batch_size,
            self.lr,
            self.decay_steps,
            self.model.l_p,
            self.model.d_in,
            self.model.l_f,
            self.model.l_c,
            self.model.l_e,
            widths.join(","),
            self.weights.semantic_weight,
            self.weights.alpha,
            self.weights.lambda_reg,
            self.weights.delta_v,
            self.weights.delta_d,
            self.cluster.bandwidth,
            self.cluster.max_iters,
            self.cluster.shift_tol,
            self.cluster.merge_radius,
            self.block_size,
            self.stride,
            self.merge_cell,
            self.merge_threshold,
            self.gen_scenes,
            self.scene.extent[0],
            self.scene.extent[1],
            self.scene.extent[2],
            self.scene.object_count.0,
            self.scene.object_count.1,
            self.scene.object_size.0,
            self.scene.object_size.1,
            self.scene.points_per_object.0,
            self.scene.points_per_object.1,
            self.scene.noise_sigma,
            self.scene.shared_object_color,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_the_default_config() {
        let cfg = RunConfig::parse("").unwrap();
        let mut expect = RunConfig::default();
        expect.apply_variant();
        assert_eq!(cfg, expect);
        assert_eq!(cfg.model.cfsm, CfsmMode::Both);
        assert!(cfg.weights.alpha > 0.0);
    }

    #[test]
    fn serialize_parse_round_trip_is_exact() {
        let text = "variant=cs_i\nseed=42\nlr=0.0005\nencoder_widths=16,32\nl_p=128\n\
                    bandwidth=0.37\ndelta_v=0.25\ngen_extent=1.5,1.5,0.75\nepochs=3\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.variant, Variant::CsI);
        assert_eq!(cfg.model.cfsm, CfsmMode::CsIOnly);
        assert_eq!(cfg.weights.alpha, 0.0, "non-3dcfs variants train without alpha");
        assert_eq!(cfg.cluster.shift_tol, 1e-3 * 0.37);
        assert_eq!(cfg.cluster.merge_radius, 0.37);
        let back = RunConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_spacing_are_tolerated() {
        let cfg = RunConfig::parse(
            "# a run\n\n  seed = 9   # trailing comment\n\tepochs=2\n",
        )
        .unwrap();
        assert_eq!((cfg.seed, cfg.epochs), (9, 2));
    }

    #[test]
    fn unknown_duplicate_and_malformed_keys_fail() {
        for (text, needle) in [
            ("bogus=1\n", "unknown config key"),
            ("seed=1\nseed=2\n", "duplicate key"),
            ("just a line\n", "expected key=value"),
            ("lr=fast\n", "bad value"),
            ("gen_extent=1,2\n", "expected 3"),
            ("variant=stellar\n", "unknown variant"),
        ] {
            let err = RunConfig::parse(text).unwrap_err();
            assert!(
                err.to_string().contains(needle),
                "{text:?} → {err}, wanted {needle:?}"
            );
        }
    }

    #[test]
    fn variant_policies_apply() {
        for (name, mode, removal) in [
            ("baseline", CfsmMode::None, false),
            ("ci_s", CfsmMode::CiSOnly, false),
            ("cs_i", CfsmMode::CsIOnly, false),
            ("cfsm", CfsmMode::Both, false),
            ("cfsm_post", CfsmMode::Both, true),
            ("3dcfs", CfsmMode::Both, false),
        ] {
            let cfg = RunConfig::parse(&format!("variant={name}\n")).unwrap();
            assert_eq!(cfg.model.cfsm, mode);
            assert_eq!(cfg.variant.mean_removal_at_inference(), removal);
            assert_eq!(cfg.weights.alpha > 0.0, name == "3dcfs");
        }
        let err = RunConfig::parse("variant=3dcfs\nalpha=0\n").unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn explicit_cluster_tolerances_survive() {
        let cfg = RunConfig::parse("bandwidth=0.5\nshift_tol=0.01\nmerge_radius=0.9\n").unwrap();
        assert_eq!(cfg.cluster.shift_tol, 0.01);
        assert_eq!(cfg.cluster.merge_radius, 0.9);
    }

    #[test]
    fn out_of_range_values_fail_validation() {
        assert!(RunConfig::parse("stride=2.0\n").is_err()); // stride > block
        assert!(RunConfig::parse("merge_threshold=1.5\n").is_err());
        assert!(RunConfig::parse("epochs=0\n").is_err());
        assert!(RunConfig::parse("lr=-1\n").is_err());
    }
}
