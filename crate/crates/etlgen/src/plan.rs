//! The typed intermediate representation of ETL plans: eight operators
//! composed into trees over source tables, plus scalar expressions and
//! output-schema computation.
//!
//! Plans use bag semantics with no implicit deduplication, matching the
//! `INSERT INTO … SELECT` statements they are rendered to. Transform
//! operators (concat, split, format-convert) append their outputs to
//! the input schema; a final projection selects and orders the columns
//! a load actually delivers.

use rust_decimal::Decimal;
use thiserror::Error;

use crate::condition::{CompareOp, CondValue, Condition};
use crate::ident::Ident;
use crate::schema::SourceSchema;
use crate::value::{format_decimal, DataType};
use crate::Violation;

/// A possibly table-qualified column reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub table: Option<Ident>,
    pub column: Ident,
}

impl ColumnRef {
    pub fn bare(column: impl Into<Ident>) -> Self {
        ColumnRef { table: None, column: column.into() }
    }

    pub fn qualified(table: impl Into<Ident>, column: impl Into<Ident>) -> Self {
        ColumnRef { table: Some(table.into()), column: column.into() }
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.table {
            Some(t) => write!(f, "{}.{}", t, self.column),
            None => write!(f, "{}", self.column),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatePartKind {
    Day,
    MonthNum,
    MonthName,
    Year,
}

impl DatePartKind {
    pub fn name(self) -> &'static str {
        match self {
            DatePartKind::Day => "day",
            DatePartKind::MonthNum => "month_num",
            DatePartKind::MonthName => "month_name",
            DatePartKind::Year => "year",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "day" => Some(DatePartKind::Day),
            "month_num" => Some(DatePartKind::MonthNum),
            "month_name" => Some(DatePartKind::MonthName),
            "year" => Some(DatePartKind::Year),
            _ => None,
        }
    }

    pub fn output_type(self) -> DataType {
        match self {
            DatePartKind::MonthName => DataType::String,
            _ => DataType::Number,
        }
    }
}

/// The closed format-conversion catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conversion {
    NumberToString,
    StringToNumber,
    /// Renders the date with pattern DD/MM/YYYY.
    DateToString,
    /// Parses pattern DD/MM/YYYY; unconvertible values become null.
    StringToDate,
    Upper,
    Lower,
}

impl Conversion {
    pub fn from_formats(from: &str, to: &str) -> Option<Self> {
        match (from, to) {
            ("number", "string") => Some(Conversion::NumberToString),
            ("string", "number") => Some(Conversion::StringToNumber),
            ("date", "string") => Some(Conversion::DateToString),
            ("string", "date") => Some(Conversion::StringToDate),
            ("string", "upper") => Some(Conversion::Upper),
            ("string", "lower") => Some(Conversion::Lower),
            _ => None,
        }
    }

    pub fn formats(self) -> (&'static str, &'static str) {
        match self {
            Conversion::NumberToString => ("number", "string"),
            Conversion::StringToNumber => ("string", "number"),
            Conversion::DateToString => ("date", "string"),
            Conversion::StringToDate => ("string", "date"),
            Conversion::Upper => ("string", "upper"),
            Conversion::Lower => ("string", "lower"),
        }
    }

    pub fn input_type(self) -> DataType {
        match self {
            Conversion::NumberToString => DataType::Number,
            Conversion::DateToString => DataType::Date,
            _ => DataType::String,
        }
    }

    pub fn output_type(self) -> DataType {
        match self {
            Conversion::StringToNumber => DataType::Number,
            Conversion::StringToDate => DataType::Date,
            _ => DataType::String,
        }
    }

    /// Whether the conversion can fail on a value and degrade to null.
    pub fn fallible(self) -> bool {
        matches!(self, Conversion::StringToNumber | Conversion::StringToDate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFn {
    Sum,
    Avg,
    Min,
    Max,
    Count,
}

impl AggFn {
    pub fn name(self) -> &'static str {
        match self {
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Count => "count",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(AggFn::Sum),
            "avg" => Some(AggFn::Avg),
            "min" => Some(AggFn::Min),
            "max" => Some(AggFn::Max),
            "count" => Some(AggFn::Count),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(Decimal),
    String(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Column(ColumnRef),
    Literal(Literal),
    Arith { op: ArithOp, left: Box<ScalarExpr>, right: Box<ScalarExpr> },
    DatePart { part: DatePartKind, column: ColumnRef },
}

impl ScalarExpr {
    pub fn column(r: ColumnRef) -> Self {
        ScalarExpr::Column(r)
    }

    pub fn arith(op: ArithOp, left: ScalarExpr, right: ScalarExpr) -> Self {
        ScalarExpr::Arith { op, left: Box::new(left), right: Box::new(right) }
    }
}

/// A named output of a projection.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputColumn {
    pub name: Ident,
    pub expr: ScalarExpr,
}

/// One aggregation of an aggregate node.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub function: AggFn,
    pub expr: ScalarExpr,
    pub output: Ident,
}

/// An ETL operator plan over source tables.
#[derive(Debug, Clone, PartialEq)]
pub enum EtlPlan {
    Scan { table: Ident },
    /// π — keep the interesting attributes, computed per row.
    Project { input: Box<EtlPlan>, columns: Vec<OutputColumn> },
    /// δ — keep the tuples whose column satisfies the condition.
    Select { input: Box<EtlPlan>, column: ColumnRef, condition: Condition },
    /// C — concatenate attribute values into a new output column.
    Concat { input: Box<EtlPlan>, parts: Vec<ColumnRef>, separator: String, output: Ident },
    /// S — divide an attribute value over new output columns.
    Split { input: Box<EtlPlan>, column: ColumnRef, delimiter: String, outputs: Vec<(Ident, usize)> },
    /// FC — convert an attribute value from one format to another.
    FormatConvert { input: Box<EtlPlan>, column: ColumnRef, conversion: Conversion, output: Ident },
    /// γ — group and fold.
    Aggregate { input: Box<EtlPlan>, group_by: Vec<ColumnRef>, aggregations: Vec<Aggregation> },
    /// Nn — drop tuples with nulls in the listed columns.
    NotNull { input: Box<EtlPlan>, columns: Vec<ColumnRef> },
    /// Equi-join juxtaposing tuples with equal attribute values.
    Join { left: Box<EtlPlan>, right: Box<EtlPlan>, predicate: Vec<(ColumnRef, ColumnRef)> },
}

impl EtlPlan {
    pub fn scan(table: impl Into<Ident>) -> Self {
        EtlPlan::Scan { table: table.into() }
    }

    pub fn operator_name(&self) -> &'static str {
        match self {
            EtlPlan::Scan { .. } => "scan",
            EtlPlan::Project { .. } => "π",
            EtlPlan::Select { .. } => "δ",
            EtlPlan::Concat { .. } => "C",
            EtlPlan::Split { .. } => "S",
            EtlPlan::FormatConvert { .. } => "FC",
            EtlPlan::Aggregate { .. } => "γ",
            EtlPlan::NotNull { .. } => "Nn",
            EtlPlan::Join { .. } => "JOIN",
        }
    }

    pub fn inputs(&self) -> Vec<&EtlPlan> {
        match self {
            EtlPlan::Scan { .. } => vec![],
            EtlPlan::Project { input, .. }
            | EtlPlan::Select { input, .. }
            | EtlPlan::Concat { input, .. }
            | EtlPlan::Split { input, .. }
            | EtlPlan::FormatConvert { input, .. }
            | EtlPlan::Aggregate { input, .. }
            | EtlPlan::NotNull { input, .. } => vec![input],
            EtlPlan::Join { left, right, .. } => vec![left, right],
        }
    }

    /// Tables scanned anywhere in the plan, in first-appearance order.
    pub fn scanned_tables(&self) -> Vec<Ident> {
        fn walk(plan: &EtlPlan, out: &mut Vec<Ident>) {
            if let EtlPlan::Scan { table } = plan {
                if !out.iter().any(|t| t == table) {
                    out.push(table.clone());
                }
            }
            for input in plan.inputs() {
                walk(input, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

/// A column of a plan's output schema. `table` is kept for scan columns
/// so qualified references stay resolvable through joins.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanColumn {
    pub table: Option<Ident>,
    pub name: Ident,
    pub data_type: DataType,
    pub nullable: bool,
}

impl PlanColumn {
    /// Qualified display name, unique within a schema.
    pub fn display_name(&self) -> String {
        match &self.table {
            Some(t) => format!("{}.{}", t, self.name),
            None => self.name.to_string(),
        }
    }

    fn folded_display(&self) -> String {
        match &self.table {
            Some(t) => format!("{}.{}", t.folded(), self.name.folded()),
            None => self.name.folded().to_string(),
        }
    }
}

/// The ordered, uniquely named columns a plan yields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanSchema {
    pub columns: Vec<PlanColumn>,
}

impl PlanSchema {
    /// Resolve a reference: qualified references match scan columns of
    /// that table; bare references match un-qualified outputs first and
    /// fall back to a unique match across all columns.
    pub fn resolve(&self, r: &ColumnRef) -> Result<(usize, &PlanColumn), String> {
        match &r.table {
            Some(table) => self
                .columns
                .iter()
                .enumerate()
                .find(|(_, c)| {
                    c.table.as_ref().is_some_and(|t| t == table) && c.name == r.column
                })
                .ok_or_else(|| format!("unknown column `{r}`")),
            None => {
                let bare: Vec<(usize, &PlanColumn)> = self
                    .columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.table.is_none() && c.name == r.column)
                    .collect();
                match bare.len() {
                    1 => return Ok(bare[0]),
                    n if n > 1 => return Err(format!("ambiguous column `{r}`")),
                    _ => {}
                }
                let any: Vec<(usize, &PlanColumn)> = self
                    .columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.name == r.column)
                    .collect();
                match any.len() {
                    0 => Err(format!("unknown column `{r}`")),
                    1 => Ok(any[0]),
                    _ => Err(format!("ambiguous column `{r}`")),
                }
            }
        }
    }

    fn push_unique(&mut self, column: PlanColumn) -> Result<(), String> {
        let display = column.folded_display();
        if self.columns.iter().any(|c| c.folded_display() == display) {
            return Err(format!("duplicate output column `{}`", column.display_name()));
        }
        self.columns.push(column);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("plan type error at {path}: {detail}")]
pub struct PlanTypeError {
    /// Operator path from the root, e.g. `π/JOIN/scan(client)`.
    pub path: String,
    pub detail: String,
}

/// How scan schemas are obtained; the executor substitutes loaded
/// relation schemas for source-table definitions.
pub(crate) trait ScanSchemas {
    fn scan_schema(&self, table: &Ident) -> Result<PlanSchema, String>;
}

impl ScanSchemas for SourceSchema {
    fn scan_schema(&self, table: &Ident) -> Result<PlanSchema, String> {
        let t = self.table(table.as_str()).ok_or_else(|| format!("unknown table `{table}`"))?;
        Ok(PlanSchema {
            columns: t
                .columns
                .iter()
                .map(|c| PlanColumn {
                    table: Some(t.name.clone()),
                    name: c.name.clone(),
                    data_type: c.data_type,
                    nullable: c.nullable,
                })
                .collect(),
        })
    }
}

/// Compute the schema of the rows a plan yields over a source schema.
pub fn plan_output_schema(plan: &EtlPlan, src: &SourceSchema) -> Result<PlanSchema, PlanTypeError> {
    schema_of(plan, src, &mut Vec::new())
}

/// Error raised while typing one node: either the node's own problem or
/// an already-located problem from a child.
enum NodeError {
    Here(String),
    Child(PlanTypeError),
}

impl From<String> for NodeError {
    fn from(s: String) -> Self {
        NodeError::Here(s)
    }
}

impl From<&str> for NodeError {
    fn from(s: &str) -> Self {
        NodeError::Here(s.to_string())
    }
}

pub(crate) fn schema_of(
    plan: &EtlPlan,
    scans: &dyn ScanSchemas,
    path: &mut Vec<String>,
) -> Result<PlanSchema, PlanTypeError> {
    path.push(match plan {
        EtlPlan::Scan { table } => format!("scan({table})"),
        other => other.operator_name().to_string(),
    });
    let result = schema_of_inner(plan, scans, path);
    let err_path = path.join("/");
    path.pop();
    result.map_err(|e| match e {
        NodeError::Here(detail) => PlanTypeError { path: err_path, detail },
        NodeError::Child(inner) => inner,
    })
}

fn schema_of_inner(
    plan: &EtlPlan,
    scans: &dyn ScanSchemas,
    path: &mut Vec<String>,
) -> Result<PlanSchema, NodeError> {
    match plan {
        EtlPlan::Scan { table } => scans.scan_schema(table).map_err(NodeError::Here),
        EtlPlan::Project { input, columns } => {
            let input = schema_of(input, scans, path).map_err(NodeError::Child)?;
            let mut out = PlanSchema::default();
            for col in columns {
                let (data_type, nullable) = type_scalar(&col.expr, &input)?;
                out.push_unique(PlanColumn { table: None, name: col.name.clone(), data_type, nullable })?;
            }
            Ok(out)
        }
        EtlPlan::Select { input, column, condition } => {
            let input = schema_of(input, scans, path).map_err(NodeError::Child)?;
            let (_, col) = input.resolve(column)?;
            check_condition(condition, col.data_type, column)?;
            Ok(input)
        }
        EtlPlan::Concat { input, parts, separator: _, output } => {
            let mut schema = schema_of(input, scans, path).map_err(NodeError::Child)?;
            if parts.is_empty() {
                return Err("concat needs at least one part".into());
            }
            let mut nullable = false;
            for part in parts {
                let (_, col) = schema.resolve(part)?;
                nullable |= col.nullable;
            }
            schema.push_unique(PlanColumn {
                table: None,
                name: output.clone(),
                data_type: DataType::String,
                nullable,
            })?;
            Ok(schema)
        }
        EtlPlan::Split { input, column, delimiter, outputs } => {
            let mut schema = schema_of(input, scans, path).map_err(NodeError::Child)?;
            let (_, col) = schema.resolve(column)?;
            if col.data_type != DataType::String {
                return Err(format!("split input `{column}` must be string, found {}", col.data_type).into());
            }
            if delimiter.is_empty() {
                return Err("split delimiter must not be empty".into());
            }
            if outputs.is_empty() {
                return Err("split needs at least one output".into());
            }
            for (name, _) in outputs {
                schema.push_unique(PlanColumn {
                    table: None,
                    name: name.clone(),
                    data_type: DataType::String,
                    nullable: true,
                })?;
            }
            Ok(schema)
        }
        EtlPlan::FormatConvert { input, column, conversion, output } => {
            let mut schema = schema_of(input, scans, path).map_err(NodeError::Child)?;
            let (_, col) = schema.resolve(column)?;
            if col.data_type != conversion.input_type() {
                return Err(format!(
                    "convert expects {} input for `{column}`, found {}",
                    conversion.input_type(),
                    col.data_type
                )
                .into());
            }
            let nullable = col.nullable || conversion.fallible();
            schema.push_unique(PlanColumn {
                table: None,
                name: output.clone(),
                data_type: conversion.output_type(),
                nullable,
            })?;
            Ok(schema)
        }
        EtlPlan::Aggregate { input, group_by, aggregations } => {
            let input = schema_of(input, scans, path).map_err(NodeError::Child)?;
            let mut out = PlanSchema::default();
            for key in group_by {
                let (_, col) = input.resolve(key)?;
                out.push_unique(PlanColumn {
                    table: None,
                    name: key.column.clone(),
                    data_type: col.data_type,
                    nullable: col.nullable,
                })?;
            }
            for agg in aggregations {
                let (operand, _) = type_scalar(&agg.expr, &input)?;
                let data_type = match agg.function {
                    AggFn::Sum | AggFn::Avg => {
                        if operand != DataType::Number {
                            return Err(format!(
                                "{} needs a number operand, found {operand}",
                                agg.function.name()
                            )
                            .into());
                        }
                        DataType::Number
                    }
                    AggFn::Count => DataType::Number,
                    AggFn::Min | AggFn::Max => operand,
                };
                out.push_unique(PlanColumn {
                    table: None,
                    name: agg.output.clone(),
                    data_type,
                    nullable: agg.function != AggFn::Count,
                })?;
            }
            Ok(out)
        }
        EtlPlan::NotNull { input, columns } => {
            let mut schema = schema_of(input, scans, path).map_err(NodeError::Child)?;
            if columns.is_empty() {
                return Err("not-null needs at least one column".into());
            }
            let mut indices = Vec::new();
            for c in columns {
                let (i, _) = schema.resolve(c)?;
                indices.push(i);
            }
            for i in indices {
                schema.columns[i].nullable = false;
            }
            Ok(schema)
        }
        EtlPlan::Join { left, right, predicate } => {
            let left = schema_of(left, scans, path).map_err(NodeError::Child)?;
            let right = schema_of(right, scans, path).map_err(NodeError::Child)?;
            if predicate.is_empty() {
                return Err("join needs at least one equality pair".into());
            }
            for (l, r) in predicate {
                let (_, lc) = left.resolve(l)?;
                let (_, rc) = right.resolve(r)?;
                if lc.data_type != rc.data_type {
                    return Err(format!(
                        "join compares `{l}` ({}) with `{r}` ({})",
                        lc.data_type, rc.data_type
                    )
                    .into());
                }
            }
            let mut out = PlanSchema::default();
            for col in left.columns.into_iter().chain(right.columns) {
                out.push_unique(col)?;
            }
            Ok(out)
        }
    }
}

/// Type of a scalar expression over an input schema, with nullability.
pub fn type_scalar(expr: &ScalarExpr, input: &PlanSchema) -> Result<(DataType, bool), String> {
    match expr {
        ScalarExpr::Column(r) => {
            let (_, col) = input.resolve(r)?;
            Ok((col.data_type, col.nullable))
        }
        ScalarExpr::Literal(Literal::Number(_)) => Ok((DataType::Number, false)),
        ScalarExpr::Literal(Literal::String(_)) => Ok((DataType::String, false)),
        ScalarExpr::Arith { op, left, right } => {
            let (lt, ln) = type_scalar(left, input)?;
            let (rt, rn) = type_scalar(right, input)?;
            if lt != DataType::Number || rt != DataType::Number {
                return Err(format!(
                    "arithmetic `{}` needs number operands, found {lt} and {rt}",
                    op.symbol()
                ));
            }
            // division by zero degrades to null
            Ok((DataType::Number, ln || rn || *op == ArithOp::Div))
        }
        ScalarExpr::DatePart { part, column } => {
            let (_, col) = input.resolve(column)?;
            if col.data_type != DataType::Date {
                return Err(format!(
                    "{}() needs a date column, `{column}` is {}",
                    part.name(),
                    col.data_type
                ));
            }
            Ok((part.output_type(), col.nullable))
        }
    }
}

/// Check a condition's comparison values against the bound column type.
pub(crate) fn check_condition(
    condition: &Condition,
    column_type: DataType,
    column: &ColumnRef,
) -> Result<(), String> {
    match condition {
        Condition::Atom { op, value } => match (op, value, column_type) {
            (CompareOp::Like, _, DataType::String) => Ok(()),
            (CompareOp::Like, _, other) => {
                Err(format!("`like` needs a string column, `{column}` is {other}"))
            }
            (_, CondValue::Number(_), DataType::Number) => Ok(()),
            (_, CondValue::Number(_), other) => {
                Err(format!("numeric comparison against `{column}` of type {other}"))
            }
            (_, CondValue::String(_), DataType::String | DataType::Date) => Ok(()),
            (_, CondValue::String(_), DataType::Number) => {
                Err(format!("string comparison against `{column}` of type number"))
            }
        },
        Condition::And(l, r) | Condition::Or(l, r) => {
            check_condition(l, column_type, column)?;
            check_condition(r, column_type, column)
        }
    }
}

/// Empty iff `plan_output_schema` succeeds at every node. Errors in
/// independent subtrees are all reported.
pub fn validate_plan(plan: &EtlPlan, src: &SourceSchema) -> Vec<Violation> {
    let mut violations = Vec::new();
    collect(plan, src, &mut Vec::new(), &mut violations);
    violations
}

fn collect(plan: &EtlPlan, src: &SourceSchema, path: &mut Vec<String>, out: &mut Vec<Violation>) {
    let inputs = plan.inputs();
    path.push(match plan {
        EtlPlan::Scan { table } => format!("scan({table})"),
        other => other.operator_name().to_string(),
    });
    let mut children_ok = true;
    for input in inputs {
        let before = out.len();
        collect(input, src, path, out);
        children_ok &= out.len() == before;
    }
    if children_ok {
        // children typed; surface only this node's own problem
        if let Err(e) = schema_of(plan, src, &mut path.clone()) {
            let violation = Violation::new(e.path, e.detail);
            if !out.contains(&violation) {
                out.push(violation);
            }
        }
    }
    path.pop();
}

/// Canonical text rendering: one operator per line, children indented.
pub fn render_plan(plan: &EtlPlan) -> String {
    let mut out = String::new();
    render_node(plan, 0, &mut out);
    out
}

fn render_node(plan: &EtlPlan, depth: usize, out: &mut String) {
    out.push_str(&"  ".repeat(depth));
    match plan {
        EtlPlan::Scan { table } => out.push_str(&format!("scan {table}")),
        EtlPlan::Project { columns, .. } => {
            let items: Vec<String> =
                columns.iter().map(|c| format!("{}={}", c.name, render_scalar(&c.expr))).collect();
            out.push_str(&format!("π {}", items.join(" , ")));
        }
        EtlPlan::Select { column, condition, .. } => {
            out.push_str(&format!("δ {column} {}", crate::condition::print_condition(condition)));
        }
        EtlPlan::Concat { parts, separator, output, .. } => {
            let items: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!("C {output}=[{}] sep='{}'", items.join(", "), separator));
        }
        EtlPlan::Split { column, delimiter, outputs, .. } => {
            let items: Vec<String> = outputs.iter().map(|(n, i)| format!("{n}:{i}")).collect();
            out.push_str(&format!("S [{}] from {column} delim='{}'", items.join(", "), delimiter));
        }
        EtlPlan::FormatConvert { column, conversion, output, .. } => {
            let (from, to) = conversion.formats();
            out.push_str(&format!("FC {output}=convert({column}, {from}->{to})"));
        }
        EtlPlan::Aggregate { group_by, aggregations, .. } => {
            let keys: Vec<String> = group_by.iter().map(|k| k.to_string()).collect();
            let aggs: Vec<String> = aggregations
                .iter()
                .map(|a| format!("{}={}({})", a.output, a.function.name(), render_scalar(&a.expr)))
                .collect();
            out.push_str(&format!("γ group=[{}] {}", keys.join(", "), aggs.join(" , ")));
        }
        EtlPlan::NotNull { columns, .. } => {
            let items: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("Nn [{}]", items.join(", ")));
        }
        EtlPlan::Join { predicate, .. } => {
            let items: Vec<String> =
                predicate.iter().map(|(l, r)| format!("{l} = {r}")).collect();
            out.push_str(&format!("JOIN {}", items.join(" , ")));
        }
    }
    out.push('\n');
    for input in plan.inputs() {
        render_node(input, depth + 1, out);
    }
}

fn render_scalar(expr: &ScalarExpr) -> String {
    match expr {
        ScalarExpr::Column(r) => r.to_string(),
        ScalarExpr::Literal(Literal::Number(d)) => format_decimal(*d),
        ScalarExpr::Literal(Literal::String(s)) => format!("'{}'", s.replace('\'', "''")),
        ScalarExpr::Arith { op, left, right } => {
            format!("({} {} {})", render_scalar(left), op.symbol(), render_scalar(right))
        }
        ScalarExpr::DatePart { part, column } => format!("{}({column})", part.name()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_source_schema;

    fn sales() -> SourceSchema {
        parse_source_schema(include_str!("../../../fixtures/sales/schema.xml")).unwrap()
    }

    #[test]
    fn scan_schema_lists_client_columns() {
        let schema = plan_output_schema(&EtlPlan::scan("client"), &sales()).unwrap();
        let names: Vec<String> = schema.columns.iter().map(|c| c.name.to_string()).collect();
        assert_eq!(names, vec!["codeC", "nom", "prenom", "ville", "codepostale"]);
        assert!(schema.columns.iter().all(|c| c.table.as_ref().unwrap() == &Ident::new("client")));
    }

    #[test]
    fn project_narrows_to_one_column() {
        let plan = EtlPlan::Project {
            input: Box::new(EtlPlan::scan("client")),
            columns: vec![OutputColumn {
                name: Ident::new("codeC"),
                expr: ScalarExpr::column(ColumnRef::bare("codeC")),
            }],
        };
        let schema = plan_output_schema(&plan, &sales()).unwrap();
        assert_eq!(schema.columns.len(), 1);
        assert_eq!(schema.columns[0].data_type, DataType::Number);
    }

    #[test]
    fn concat_adds_a_string_column() {
        let plan = EtlPlan::Concat {
            input: Box::new(EtlPlan::scan("client")),
            parts: vec![ColumnRef::bare("codepostale"), ColumnRef::bare("ville")],
            separator: " ".into(),
            output: Ident::new("adresse"),
        };
        let schema = plan_output_schema(&plan, &sales()).unwrap();
        let adresse = schema.columns.last().unwrap();
        assert_eq!(adresse.name, Ident::new("adresse"));
        assert_eq!(adresse.data_type, DataType::String);
        assert_eq!(schema.columns.len(), 6);
    }

    #[test]
    fn select_on_absent_column_is_one_violation() {
        let plan = EtlPlan::Select {
            input: Box::new(EtlPlan::scan("client")),
            column: ColumnRef::bare("telephone"),
            condition: crate::condition::parse_condition(">(0)").unwrap(),
        };
        let violations = validate_plan(&plan, &sales());
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("telephone"));
    }

    #[test]
    fn arith_over_string_is_one_violation() {
        let plan = EtlPlan::Project {
            input: Box::new(EtlPlan::scan("client")),
            columns: vec![OutputColumn {
                name: Ident::new("x"),
                expr: ScalarExpr::arith(
                    ArithOp::Add,
                    ScalarExpr::column(ColumnRef::bare("nom")),
                    ScalarExpr::Literal(Literal::Number(Decimal::from(1))),
                ),
            }],
        };
        let violations = validate_plan(&plan, &sales());
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("number operands"));
    }

    #[test]
    fn join_schema_concatenates_and_qualifies() {
        let plan = EtlPlan::Join {
            left: Box::new(EtlPlan::scan("lignes_fact")),
            right: Box::new(EtlPlan::scan("facture")),
            predicate: vec![(
                ColumnRef::qualified("lignes_fact", "refF"),
                ColumnRef::qualified("facture", "refF"),
            )],
        };
        let src = sales();
        let schema = plan_output_schema(&plan, &src).unwrap();
        let left = plan_output_schema(&EtlPlan::scan("lignes_fact"), &src).unwrap();
        let right = plan_output_schema(&EtlPlan::scan("facture"), &src).unwrap();
        assert_eq!(schema.columns.len(), left.columns.len() + right.columns.len());
        // both refF columns stay addressable through their qualifier
        assert!(schema.resolve(&ColumnRef::qualified("facture", "refF")).is_ok());
        assert!(schema.resolve(&ColumnRef::qualified("lignes_fact", "refF")).is_ok());
        assert!(schema.resolve(&ColumnRef::bare("refF")).is_err());
    }

    #[test]
    fn nested_projection_matches_direct_projection() {
        let wide = EtlPlan::Project {
            input: Box::new(EtlPlan::scan("client")),
            columns: ["codeC", "nom", "ville"]
                .into_iter()
                .map(|n| OutputColumn {
                    name: Ident::new(n),
                    expr: ScalarExpr::column(ColumnRef::bare(n)),
                })
                .collect(),
        };
        let narrow_over_wide = EtlPlan::Project {
            input: Box::new(wide),
            columns: vec![OutputColumn {
                name: Ident::new("nom"),
                expr: ScalarExpr::column(ColumnRef::bare("nom")),
            }],
        };
        let narrow_direct = EtlPlan::Project {
            input: Box::new(EtlPlan::scan("client")),
            columns: vec![OutputColumn {
                name: Ident::new("nom"),
                expr: ScalarExpr::column(ColumnRef::bare("nom")),
            }],
        };
        let src = sales();
        assert_eq!(
            plan_output_schema(&narrow_over_wide, &src).unwrap(),
            plan_output_schema(&narrow_direct, &src).unwrap()
        );
    }

    #[test]
    fn render_mentions_every_operator() {
        let plan = EtlPlan::Project {
            input: Box::new(EtlPlan::Join {
                left: Box::new(EtlPlan::scan("Produit")),
                right: Box::new(EtlPlan::scan("categorie")),
                predicate: vec![(
                    ColumnRef::qualified("Produit", "codecat"),
                    ColumnRef::qualified("categorie", "codecat"),
                )],
            }),
            columns: vec![OutputColumn {
                name: Ident::new("codeP"),
                expr: ScalarExpr::column(ColumnRef::qualified("Produit", "codeP")),
            }],
        };
        let text = render_plan(&plan);
        assert_eq!(
            text,
            "π codeP=Produit.codeP\n  JOIN Produit.codecat = categorie.codecat\n    scan Produit\n    scan categorie\n"
        );
    }
}
