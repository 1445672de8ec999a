//! Table schemas. Each file starts with its magic line, then a header row
//! naming the columns in order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Text,
    Integer,
    Float,
    /// Float column that may be left empty.
    OptionalFloat,
    State,
    Occupation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub kind: ColumnType,
    pub units: &'static str,
}

const fn col(name: &'static str, kind: ColumnType, units: &'static str) -> Column {
    Column { name, kind, units }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSchema {
    pub name: &'static str,
    pub magic: &'static str,
    pub columns: &'static [Column],
    pub key: &'static [&'static str],
}

impl TableSchema {
    pub fn column_names(&self) -> Vec<&'static str> {
        self.columns.iter().map(|c| c.name).collect()
    }
}

use ColumnType::*;

pub const EMPLOYMENT: TableSchema = TableSchema {
    name: "employment",
    magic: "laborflux/employment/v1",
    columns: &[
        col("state", State, "USPS code"),
        col("year", Integer, "calendar year"),
        col("occ", Occupation, "SOC XX-XXXX"),
        col("employment", Integer, "workers"),
        col("mean_wage", Float, "USD per year"),
    ],
    key: &["state", "year", "occ"],
};

pub const CLAIMS: TableSchema = TableSchema {
    name: "claims",
    magic: "laborflux/claims/v1",
    columns: &[
        col("state", State, "USPS code"),
        col("year", Integer, "calendar year"),
        col("month", Integer, "1-12"),
        col("occ", Occupation, "SOC major XX"),
        col("recipients", Integer, "benefit recipients"),
    ],
    key: &["state", "year", "month", "occ"],
};

const RATE_COLUMNS: &[Column] = &[
    col("state", State, "USPS code"),
    col("year", Integer, "calendar year"),
    col("month", Integer, "1-12"),
    col("rate", Float, "fraction in [0,1]"),
];

pub const URATE: TableSchema = TableSchema {
    name: "urate",
    magic: "laborflux/urate/v1",
    columns: RATE_COLUMNS,
    key: &["state", "year", "month"],
};

pub const SEPARATIONS: TableSchema = TableSchema {
    name: "separations",
    magic: "laborflux/separations/v1",
    columns: RATE_COLUMNS,
    key: &["state", "year", "month"],
};

pub const SKILLS: TableSchema = TableSchema {
    name: "skills",
    magic: "laborflux/skills/v1",
    columns: &[
        col("year", Integer, "calendar year"),
        col("occ", Occupation, "SOC XX-XXXX"),
        col("skill", Text, "survey item id"),
        col("value", Float, "raw Likert value"),
        col("scale_min", Float, "Likert lower bound"),
        col("scale_max", Float, "Likert upper bound"),
    ],
    key: &["year", "occ", "skill"],
};

pub const EXPOSURE: TableSchema = TableSchema {
    name: "exposure",
    magic: "laborflux/exposure/v1",
    columns: &[
        col("score", Text, "score name"),
        col("study", Text, "source study"),
        col("wave", Integer, "1, 2 or 3"),
        col("occ", Occupation, "SOC XX-XXXX"),
        col("value", Float, "score units"),
    ],
    key: &["score", "occ"],
};

pub const RISK: TableSchema = TableSchema {
    name: "risk",
    magic: "laborflux/risk/v1",
    columns: &[
        col("state", State, "USPS code"),
        col("year", Integer, "calendar year"),
        col("month", Integer, "1-12"),
        col("occ", Occupation, "SOC major XX"),
        col("p_soc_given_u", Float, "probability"),
        col("p_u", Float, "probability"),
        col("p_soc", Float, "probability"),
        col("risk", Float, "probability"),
        col(
            "log10_risk",
            OptionalFloat,
            "log10 probability; empty when risk = 0",
        ),
    ],
    key: &["state", "year", "month", "occ"],
};

pub const ANNUAL_RISK: TableSchema = TableSchema {
    name: "annualrisk",
    magic: "laborflux/annualrisk/v1",
    columns: &[
        col("state", State, "USPS code"),
        col("year", Integer, "calendar year"),
        col("occ", Occupation, "SOC major XX"),
        col("median_risk", Float, "probability"),
        col("months", Integer, "monthly rows in the median"),
    ],
    key: &["state", "year", "occ"],
};

pub const STATE_EXPOSURE: TableSchema = TableSchema {
    name: "stateexposure",
    magic: "laborflux/stateexposure/v1",
    columns: &[
        col("state", State, "USPS code"),
        col("year", Integer, "calendar year"),
        col("score", Text, "score name"),
        col("exposure", Float, "score units"),
        col("covered_share", Float, "employment share with a score"),
    ],
    key: &["state", "year", "score"],
};

pub const SKILL_CHANGE: TableSchema = TableSchema {
    name: "skillchange",
    magic: "laborflux/skillchange/v1",
    columns: &[
        col("occ", Occupation, "SOC XX-XXXX"),
        col("year", Integer, "update year"),
        col("baseline_year", Integer, "calendar year"),
        col("skill_change", Float, "1 - weighted Jaccard, in [0,1]"),
    ],
    key: &["occ"],
};

pub const PCA_COMPONENTS: TableSchema = TableSchema {
    name: "pca",
    magic: "laborflux/pca/v1",
    columns: &[
        col(
            "component",
            Integer,
            "0 = column mean, k >= 1 = k-th component",
        ),
        col("skill", Text, "survey item id"),
        col("value", Float, "mean or loading"),
    ],
    key: &["component", "skill"],
};

pub const PCA_VARIANCE: TableSchema = TableSchema {
    name: "pcavariance",
    magic: "laborflux/pcavariance/v1",
    columns: &[
        col("component", Integer, "1-based"),
        col("explained", Float, "fraction of total variance"),
        col("cumulative", Float, "fraction of total variance"),
    ],
    key: &["component"],
};

pub const TRUTH: TableSchema = TableSchema {
    name: "truth",
    magic: "laborflux/truth/v1",
    columns: &[
        col("state", State, "USPS code"),
        col("year", Integer, "calendar year"),
        col("month", Integer, "1-12"),
        col("occ", Occupation, "SOC major XX"),
        col("employed", Integer, "workers"),
        col("unemployed", Integer, "workers whose last job was in occ"),
    ],
    key: &["state", "year", "month", "occ"],
};

pub const ALL: &[TableSchema] = &[
    EMPLOYMENT,
    CLAIMS,
    URATE,
    SEPARATIONS,
    SKILLS,
    EXPOSURE,
    RISK,
    ANNUAL_RISK,
    STATE_EXPOSURE,
    SKILL_CHANGE,
    PCA_COMPONENTS,
    PCA_VARIANCE,
    TRUTH,
];
