//! Declarative shape-propagation validator for network topologies:
//! layers declare their kind, stride, channels, and inputs, and the
//! validator walks the graph computing every feature-map shape or a
//! diagnostic naming the offending layer.
//!
//! Builtin specs describe the dual-encoder U-Net generator, the three
//! identical multi-scale discriminators, and the patch refinement
//! subnet. The validator accepts any spec, builtin or parsed from a
//! text file.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

const NETSPEC_VERSION_LINE: &str = "mattebench-netspec v1";

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("netspec starts with {found:?}, expected {NETSPEC_VERSION_LINE:?}")]
    UnsupportedSpecVersion { found: String },
    #[error("netspec line {line_no}: {reason}: {line:?}")]
    MalformedSpec {
        line_no: usize,
        reason: &'static str,
        line: String,
    },
    #[error("{context} {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Feature-map dimensions, displayed as `width x height x channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Input,
    Conv,
    Conv1x1,
    ResidualBlock,
    Upsample,
    Downsample,
    ConcatDepth,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv => "conv",
            LayerKind::Conv1x1 => "conv1x1",
            LayerKind::ResidualBlock => "residual_block",
            LayerKind::Upsample => "upsample",
            LayerKind::Downsample => "downsample",
            LayerKind::ConcatDepth => "concat_depth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "input" => LayerKind::Input,
            "conv" => LayerKind::Conv,
            "conv1x1" => LayerKind::Conv1x1,
            "residual_block" => LayerKind::ResidualBlock,
            "upsample" => LayerKind::Upsample,
            "downsample" => LayerKind::Downsample,
            "concat_depth" => LayerKind::ConcatDepth,
            _ => return None,
        })
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One layer record. `spatial_stride` divides dimensions for conv and
/// downsample layers (ceil division) and multiplies them for upsample
/// layers. `out_channels` of 0 on a concat_depth layer means the sum
/// is inferred rather than checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    pub in_refs: Vec<String>,
    pub spatial_stride: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    fn new(id: &str, kind: LayerKind, in_refs: &[&str], stride: usize, channels: usize) -> Self {
        Self {
            id: id.to_string(),
            kind,
            in_refs: in_refs.iter().map(|r| r.to_string()).collect(),
            spatial_stride: stride,
            out_channels: channels,
        }
    }
}

/// Named topology with one declared validation input. The declared
/// channel count applies to the first input layer; further input
/// layers carry their own channel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub declared_input: Shape,
}

/// Why a layer failed shape resolution.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeIssue {
    #[error("reference to unknown layer {referenced:?}")]
    UnresolvedReference { referenced: String },
    #[error("layer participates in a reference cycle")]
    Cycle,
    #[error("duplicate layer id")]
    DuplicateId,
    #[error("{kind} takes {expected} inputs, got {actual}")]
    WrongArity {
        kind: LayerKind,
        expected: &'static str,
        actual: usize,
    },
    #[error("input from {origin} is {actual} but {expected} was required")]
    SpatialMismatch {
        origin: String,
        expected: String,
        actual: String,
    },
    #[error("expected {expected} output channels, declared {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("{kind} requires stride 1, got {stride}")]
    StrideNotOne { kind: LayerKind, stride: usize },
    #[error("stride must be >= 1")]
    ZeroStride,
    #[error("output channels must be >= 1")]
    ZeroChannels,
    #[error("first input layer declares {declared} channels but the network was probed with {probed}")]
    InputChannelMismatch { declared: usize, probed: usize },
    #[error("upstream layer {origin} has no resolved shape")]
    UpstreamUnresolved { origin: String },
}

/// Resolution outcome for one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerFlow {
    pub id: String,
    pub kind: LayerKind,
    pub shape: Option<Shape>,
    pub issue: Option<ShapeIssue>,
}

/// Per-layer shapes in declaration order plus the overall verdict:
/// valid iff every layer resolved with no issue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeFlow {
    pub layers: Vec<LayerFlow>,
    pub valid: bool,
}

impl ShapeFlow {
    /// Resolved shape of the layer with this id, if any.
    pub fn shape_of(&self, id: &str) -> Option<Shape> {
        self.layers.iter().find(|l| l.id == id).and_then(|l| l.shape)
    }

    pub fn issues(&self) -> impl Iterator<Item = (&str, &ShapeIssue)> {
        self.layers
            .iter()
            .filter_map(|l| l.issue.as_ref().map(|i| (l.id.as_str(), i)))
    }
}

fn resolve_layer(
    layer: &LayerSpec,
    inputs: &[Shape],
    first_input: bool,
    probe: Shape,
) -> Result<Shape, ShapeIssue> {
    let arity = |expected: &'static str, ok: bool| -> Result<(), ShapeIssue> {
        if ok {
            Ok(())
        } else {
            Err(ShapeIssue::WrongArity {
                kind: layer.kind,
                expected,
                actual: layer.in_refs.len(),
            })
        }
    };
    if layer.spatial_stride == 0 {
        return Err(ShapeIssue::ZeroStride);
    }
    match layer.kind {
        LayerKind::Input => {
            arity("0", inputs.is_empty())?;
            if layer.spatial_stride != 1 {
                return Err(ShapeIssue::StrideNotOne {
                    kind: layer.kind,
                    stride: layer.spatial_stride,
                });
            }
            if layer.out_channels == 0 {
                return Err(ShapeIssue::ZeroChannels);
            }
            if first_input && layer.out_channels != probe.channels {
                return Err(ShapeIssue::InputChannelMismatch {
                    declared: layer.out_channels,
                    probed: probe.channels,
                });
            }
            Ok(Shape::new(probe.width, probe.height, layer.out_channels))
        }
        LayerKind::Conv | LayerKind::Downsample => {
            arity("1", inputs.len() == 1)?;
            if layer.out_channels == 0 {
                return Err(ShapeIssue::ZeroChannels);
            }
            let s = layer.spatial_stride;
            Ok(Shape::new(
                inputs[0].width.div_ceil(s),
                inputs[0].height.div_ceil(s),
                layer.out_channels,
            ))
        }
        LayerKind::Conv1x1 => {
            arity("1", inputs.len() == 1)?;
            if layer.spatial_stride != 1 {
                return Err(ShapeIssue::StrideNotOne {
                    kind: layer.kind,
                    stride: layer.spatial_stride,
                });
            }
            if layer.out_channels == 0 {
                return Err(ShapeIssue::ZeroChannels);
            }
            Ok(Shape::new(inputs[0].width, inputs[0].height, layer.out_channels))
        }
        LayerKind::ResidualBlock => {
            arity("1", inputs.len() == 1)?;
            if layer.spatial_stride != 1 {
                return Err(ShapeIssue::StrideNotOne {
                    kind: layer.kind,
                    stride: layer.spatial_stride,
                });
            }
            if layer.out_channels != inputs[0].channels {
                return Err(ShapeIssue::ChannelMismatch {
                    expected: inputs[0].channels,
                    actual: layer.out_channels,
                });
            }
            Ok(inputs[0])
        }
        LayerKind::Upsample => {
            arity("1", inputs.len() == 1)?;
            if layer.out_channels == 0 {
                return Err(ShapeIssue::ZeroChannels);
            }
            let s = layer.spatial_stride;
            Ok(Shape::new(
                inputs[0].width * s,
                inputs[0].height * s,
                layer.out_channels,
            ))
        }
        LayerKind::ConcatDepth => {
            arity(">= 2", inputs.len() >= 2)?;
            let (w, h) = (inputs[0].width, inputs[0].height);
            for (i, shape) in inputs.iter().enumerate().skip(1) {
                if shape.width != w || shape.height != h {
                    return Err(ShapeIssue::SpatialMismatch {
                        origin: layer.in_refs[i].clone(),
                        expected: format!("{w}x{h}"),
                        actual: format!("{}x{}", shape.width, shape.height),
                    });
                }
            }
            let sum: usize = inputs.iter().map(|s| s.channels).sum();
            if layer.out_channels != 0 && layer.out_channels != sum {
                return Err(ShapeIssue::ChannelMismatch {
                    expected: sum,
                    actual: layer.out_channels,
                });
            }
            Ok(Shape::new(w, h, sum))
        }
    }
}

/// Compute every layer's shape at the probe input, or a diagnostic per
/// unresolvable layer. Deterministic and total: bad specs yield
/// diagnostics, never panics.
pub fn propagate_shapes(net: &NetworkSpec, probe: Shape) -> ShapeFlow {
    let n = net.layers.len();
    let mut issues: Vec<Option<ShapeIssue>> = vec![None; n];
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, layer) in net.layers.iter().enumerate() {
        if ids.contains_key(layer.id.as_str()) {
            issues[i] = Some(ShapeIssue::DuplicateId);
        } else {
            ids.insert(&layer.id, i);
        }
    }

    // Reference edges; unknown ids become per-layer diagnostics.
    let mut refs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, layer) in net.layers.iter().enumerate() {
        if issues[i].is_some() {
            continue;
        }
        for r in &layer.in_refs {
            match ids.get(r.as_str()) {
                Some(&j) => refs[i].push(j),
                None => {
                    issues[i] = Some(ShapeIssue::UnresolvedReference {
                        referenced: r.clone(),
                    });
                    break;
                }
            }
        }
    }

    // Kahn topological order over the healthy layers; leftovers are
    // cyclic.
    let mut indegree = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, sources) in refs.iter().enumerate() {
        if issues[i].is_some() {
            continue;
        }
        indegree[i] = sources.len();
        for &j in sources {
            dependents[j].push(i);
        }
    }
    let mut queue: Vec<usize> = (0..n)
        .filter(|&i| issues[i].is_some() || indegree[i] == 0)
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut head = 0;
    while head < queue.len() {
        let i = queue[head];
        head += 1;
        order.push(i);
        for &d in &dependents[i] {
            indegree[d] -= 1;
            if indegree[d] == 0 && issues[d].is_none() {
                queue.push(d);
            }
        }
    }
    let in_order: Vec<bool> = {
        let mut seen = vec![false; n];
        for &i in &order {
            seen[i] = true;
        }
        seen
    };
    for i in 0..n {
        if issues[i].is_none() && !in_order[i] {
            issues[i] = Some(ShapeIssue::Cycle);
        }
    }

    let first_input = net
        .layers
        .iter()
        .position(|l| l.kind == LayerKind::Input)
        .unwrap_or(n);
    let mut shapes: Vec<Option<Shape>> = vec![None; n];
    for &i in &order {
        if issues[i].is_some() {
            continue;
        }
        let mut inputs = Vec::with_capacity(refs[i].len());
        let mut blocked = None;
        for &j in &refs[i] {
            match shapes[j] {
                Some(s) => inputs.push(s),
                None => {
                    blocked = Some(ShapeIssue::UpstreamUnresolved {
                        origin: net.layers[j].id.clone(),
                    });
                    break;
                }
            }
        }
        if let Some(issue) = blocked {
            issues[i] = Some(issue);
            continue;
        }
        match resolve_layer(&net.layers[i], &inputs, i == first_input, probe) {
            Ok(shape) => shapes[i] = Some(shape),
            Err(issue) => issues[i] = Some(issue),
        }
    }

    let layers: Vec<LayerFlow> = net
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerFlow {
            id: l.id.clone(),
            kind: l.kind,
            shape: shapes[i],
            issue: issues[i].clone(),
        })
        .collect();
    let valid = !layers.is_empty() && layers.iter().all(|l| l.shape.is_some() && l.issue.is_none());
    ShapeFlow { layers, valid }
}

/// Dual-encoder U-Net generator: a 3-channel content encoder beside a
/// lighter segmentation encoder whose input depth-concatenates a
/// 1-channel segmentation map with the 3-channel foreground, a
/// 6-block residual core on the fused bottleneck, and a decoder with
/// per-encoder 1x1-reduced skip connections. Validates at 1280x768.
pub fn builtin_generator_spec() -> NetworkSpec {
    use LayerKind::*;
    let l = LayerSpec::new;
    let mut layers = vec![
        l("content_in", Input, &[], 1, 3),
        l("seg_map_in", Input, &[], 1, 1),
        l("seg_fg_in", Input, &[], 1, 3),
        l("seg_combined", ConcatDepth, &["seg_map_in", "seg_fg_in"], 1, 4),
        // Content encoder, halving resolution per level.
        l("c_enc1", Conv, &["content_in"], 2, 64),
        l("c_enc2", Conv, &["c_enc1"], 2, 128),
        l("c_enc3", Conv, &["c_enc2"], 2, 256),
        l("c_enc4", Conv, &["c_enc3"], 2, 512),
        // Lighter segmentation encoder at half the widths.
        l("s_enc1", Conv, &["seg_combined"], 2, 32),
        l("s_enc2", Conv, &["s_enc1"], 2, 64),
        l("s_enc3", Conv, &["s_enc2"], 2, 128),
        l("s_enc4", Conv, &["s_enc3"], 2, 256),
        // Fused bottleneck and residual core.
        l("fuse", ConcatDepth, &["c_enc4", "s_enc4"], 1, 768),
        l("fuse_reduce", Conv1x1, &["fuse"], 1, 512),
    ];
    for i in 1..=6 {
        let prev = if i == 1 {
            "fuse_reduce".to_string()
        } else {
            format!("res{}", i - 1)
        };
        layers.push(l(&format!("res{i}"), ResidualBlock, &[&prev], 1, 512));
    }
    layers.extend([
        // Skip taps from both encoders, each through a 1x1 reduction.
        l("c_skip3", Conv1x1, &["c_enc3"], 1, 128),
        l("s_skip3", Conv1x1, &["s_enc3"], 1, 128),
        l("c_skip2", Conv1x1, &["c_enc2"], 1, 64),
        l("s_skip2", Conv1x1, &["s_enc2"], 1, 64),
        l("c_skip1", Conv1x1, &["c_enc1"], 1, 32),
        l("s_skip1", Conv1x1, &["s_enc1"], 1, 32),
        // Decoder.
        l("dec4_up", Upsample, &["res6"], 2, 256),
        l("dec4_cat", ConcatDepth, &["dec4_up", "c_skip3", "s_skip3"], 1, 512),
        l("dec4", Conv, &["dec4_cat"], 1, 256),
        l("dec3_up", Upsample, &["dec4"], 2, 128),
        l("dec3_cat", ConcatDepth, &["dec3_up", "c_skip2", "s_skip2"], 1, 256),
        l("dec3", Conv, &["dec3_cat"], 1, 128),
        l("dec2_up", Upsample, &["dec3"], 2, 64),
        l("dec2_cat", ConcatDepth, &["dec2_up", "c_skip1", "s_skip1"], 1, 128),
        l("dec2", Conv, &["dec2_cat"], 1, 64),
        l("dec1_up", Upsample, &["dec2"], 2, 32),
        l("out_alpha", Conv, &["dec1_up"], 1, 1),
    ]);
    NetworkSpec {
        name: "generator".to_string(),
        layers,
        declared_input: Shape::new(1280, 768, 3),
    }
}

fn discriminator_layers() -> Vec<LayerSpec> {
    use LayerKind::*;
    let l = LayerSpec::new;
    vec![
        l("d_in", Input, &[], 1, 4),
        l("d1", Conv, &["d_in"], 2, 64),
        l("d2", Conv, &["d1"], 2, 128),
        l("d3", Conv, &["d2"], 2, 256),
        l("d4", Conv, &["d3"], 1, 512),
        l("d_out", Conv, &["d4"], 1, 1),
    ]
}

/// Three structurally identical discriminators over the pyramid
/// scales. Each consumes 4 channels (image plus matte); the specs
/// differ only in name and declared input dimensions.
pub fn builtin_discriminator_pyramid_spec() -> [NetworkSpec; 3] {
    let scales = [
        ("discriminator_full", 1280, 768),
        ("discriminator_half", 640, 384),
        ("discriminator_quarter", 320, 192),
    ];
    scales.map(|(name, w, h)| NetworkSpec {
        name: name.to_string(),
        layers: discriminator_layers(),
        declared_input: Shape::new(w, h, 4),
    })
}

/// Patch refinement subnet: consumes a 64x64 4-channel patch (image
/// plus predicted matte) and emits a refined 64x64 matte patch.
pub fn builtin_refinement_spec() -> NetworkSpec {
    use LayerKind::*;
    let l = LayerSpec::new;
    NetworkSpec {
        name: "refinement".to_string(),
        layers: vec![
            l("patch_in", Input, &[], 1, 4),
            l("r_enc1", Conv, &["patch_in"], 1, 32),
            l("r_enc2", Conv, &["r_enc1"], 2, 64),
            l("r_res1", ResidualBlock, &["r_enc2"], 1, 64),
            l("r_res2", ResidualBlock, &["r_res1"], 1, 64),
            l("r_up", Upsample, &["r_res2"], 2, 32),
            l("r_fuse", ConcatDepth, &["r_up", "r_enc1"], 1, 64),
            l("r_reduce", Conv1x1, &["r_fuse"], 1, 32),
            l("r_out", Conv, &["r_reduce"], 1, 1),
        ],
        declared_input: Shape::new(64, 64, 4),
    }
}

impl NetworkSpec {
    /// Render the line-oriented text form (one layer per line).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(NETSPEC_VERSION_LINE);
        out.push('\n');
        out.push_str(&format!("name\t{}\n", self.name));
        out.push_str(&format!("input\t{}\n", self.declared_input));
        for l in &self.layers {
            out.push_str(&format!(
                "layer\t{}\t{}\t{}\t{}\t{}\n",
                l.id,
                l.kind,
                l.spatial_stride,
                l.out_channels,
                l.in_refs.join(",")
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ArchError> {
        let mut lines = text.lines().enumerate();
        let (_, version) = lines.next().ok_or(ArchError::UnsupportedSpecVersion {
            found: String::new(),
        })?;
        if version != NETSPEC_VERSION_LINE {
            return Err(ArchError::UnsupportedSpecVersion {
                found: version.to_string(),
            });
        }
        let mut name = None;
        let mut declared_input = None;
        let mut layers = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &'static str| ArchError::MalformedSpec {
                line_no,
                reason,
                line: line.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "name" => {
                    if fields.len() != 2 {
                        return Err(malformed("name takes one value"));
                    }
                    name = Some(fields[1].to_string());
                }
                "input" => {
                    if fields.len() != 2 {
                        return Err(malformed("input takes one WxHxC value"));
                    }
                    let parts: Vec<&str> = fields[1].split('x').collect();
                    if parts.len() != 3 {
                        return Err(malformed("input must be WxHxC"));
                    }
                    let dims: Vec<usize> = parts
                        .iter()
                        .map(|p| p.parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| malformed("input dimensions must be integers"))?;
                    declared_input = Some(Shape::new(dims[0], dims[1], dims[2]));
                }
                "layer" => {
                    if fields.len() != 6 {
                        return Err(malformed(
                            "layer needs id, kind, stride, channels, refs",
                        ));
                    }
                    let kind = LayerKind::parse(fields[2]).ok_or(malformed("unknown layer kind"))?;
                    let stride = fields[3]
                        .parse()
                        .map_err(|_| malformed("stride must be an integer"))?;
                    let channels = fields[4]
                        .parse()
                        .map_err(|_| malformed("channels must be an integer"))?;
                    let in_refs = if fields[5].is_empty() {
                        Vec::new()
                    } else {
                        fields[5].split(',').map(|s| s.to_string()).collect()
                    };
                    layers.push(LayerSpec {
                        id: fields[1].to_string(),
                        kind,
                        in_refs,
                        spatial_stride: stride,
                        out_channels: channels,
                    });
                }
                _ => return Err(malformed("unknown record type")),
            }
        }
        Ok(NetworkSpec {
            name: name.ok_or(ArchError::MalformedSpec {
                line_no: 0,
                reason: "missing name record",
                line: String::new(),
            })?,
            layers,
            declared_input: declared_input.ok_or(ArchError::MalformedSpec {
                line_no: 0,
                reason: "missing input record",
                line: String::new(),
            })?,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ArchError> {
        let text = std::fs::read_to_string(path).map_err(|source| ArchError::Io {
            context: "read netspec",
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Propagate at the declared input.
    pub fn validate(&self) -> ShapeFlow {
        propagate_shapes(self, self.declared_input)
    }
}
