use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::tensor::ShapeError;

/// What sits between the BiGRU and the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Fully connected layer over the final forward and backward hidden states.
    Dense,
    /// Per-channel mean of the BiGRU output sequence.
    #[serde(alias = "gap")]
    GlobalAveragePool,
}

impl Head {
    pub fn name(&self) -> &'static str {
        match self {
            Head::Dense => "dense",
            Head::GlobalAveragePool => "gap",
        }
    }
}

impl FromStr for Head {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(Head::Dense),
            "gap" | "global_average_pool" => Ok(Head::GlobalAveragePool),
            other => Err(format!("unknown head `{other}` (expected dense or gap)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLayer {
    /// Multi-class probabilities over `classes` outputs.
    Softmax { classes: usize },
    /// A single logistic unit for two-class problems.
    Sigmoid,
}

impl OutputLayer {
    /// Picks softmax for three or more classes and sigmoid for two.
    pub fn for_classes(classes: usize) -> Self {
        if classes == 2 {
            OutputLayer::Sigmoid
        } else {
            OutputLayer::Softmax { classes }
        }
    }

    pub fn num_classes(&self) -> usize {
        match *self {
            OutputLayer::Softmax { classes } => classes,
            OutputLayer::Sigmoid => 2,
        }
    }

    /// Width of the final affine layer.
    pub fn logits(&self) -> usize {
        match *self {
            OutputLayer::Softmax { classes } => classes,
            OutputLayer::Sigmoid => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutputLayer::Softmax { .. } => "softmax",
            OutputLayer::Sigmoid => "sigmoid",
        }
    }
}

/// Architecture of the CNN-BiGRU classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_len: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool_size: usize,
    pub gru_units: usize,
    pub dense_units: usize,
    pub head: Head,
    pub hidden_activation: ActivationKind,
    pub output: OutputLayer,
}

impl ModelSpec {
    /// Default layer sizes: 32 filters of width 3, pool 2, 64 GRU units per
    /// direction and a 128-unit dense head.
    pub fn new(input_len: usize, output: OutputLayer, hidden_activation: ActivationKind) -> Self {
        Self {
            input_len,
            conv_filters: 32,
            conv_kernel: 3,
            pool_size: 2,
            gru_units: 64,
            dense_units: 128,
            head: Head::Dense,
            hidden_activation,
            output,
        }
    }

    /// The small configuration used by the gradient checks.
    pub fn tiny(input_len: usize, output: OutputLayer, hidden_activation: ActivationKind) -> Self {
        Self {
            conv_filters: 2,
            gru_units: 2,
            dense_units: 4,
            ..Self::new(input_len, output, hidden_activation)
        }
    }

    pub fn with_head(mut self, head: Head) -> Self {
        self.head = head;
        self
    }

    pub fn with_activation(mut self, act: ActivationKind) -> Self {
        self.hidden_activation = act;
        self
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        let extents = [
            ("input_len", self.input_len),
            ("conv_filters", self.conv_filters),
            ("conv_kernel", self.conv_kernel),
            ("pool_size", self.pool_size),
            ("gru_units", self.gru_units),
            ("dense_units", self.dense_units),
        ];
        if let Some((name, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(ShapeError::Invalid(format!("{name} must be positive")));
        }
        if self.input_len < self.conv_kernel {
            return Err(ShapeError::Invalid(format!(
                "input_len {} is shorter than conv_kernel {}",
                self.input_len, self.conv_kernel
            )));
        }
        if self.conv_len() < self.pool_size {
            return Err(ShapeError::Invalid(format!(
                "convolution output length {} is shorter than pool_size {}",
                self.conv_len(),
                self.pool_size
            )));
        }
        if let OutputLayer::Softmax { classes } = self.output {
            if classes < 2 {
                return Err(ShapeError::Invalid(format!(
                    "softmax output needs at least 2 classes, got {classes}"
                )));
            }
        }
        Ok(())
    }

    pub fn conv_len(&self) -> usize {
        self.input_len + 1 - self.conv_kernel
    }

    /// Sequence length seen by the BiGRU.
    pub fn seq_len(&self) -> usize {
        self.conv_len() / self.pool_size
    }

    pub fn head_dim(&self) -> usize {
        match self.head {
            Head::Dense => self.dense_units,
            Head::GlobalAveragePool => 2 * self.gru_units,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.output.num_classes()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Conv1D({}x{}, {}) -> MaxPool({}) -> BiGRU({}) -> {} -> {}({})",
            self.conv_filters,
            self.conv_kernel,
            self.hidden_activation,
            self.pool_size,
            self.gru_units,
            match self.head {
                Head::Dense => format!("Dense({})", self.dense_units),
                Head::GlobalAveragePool => "GAP".to_string(),
            },
            self.output.name(),
            self.num_classes()
        )
    }
}
