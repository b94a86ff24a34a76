//! The relational source schema: tables, columns, keys, and discovery
//! of foreign-key join paths used to assemble multi-table loads.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::ident::Ident;
use crate::value::DataType;
use crate::xml::{self, Location, XmlError};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSchema {
    pub name: Ident,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: Ident,
    pub columns: Vec<Column>,
    /// Non-empty; every name is one of `columns`.
    pub primary_key: Vec<Ident>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: Ident,
    pub data_type: DataType,
    pub nullable: bool,
    pub foreign_key: Option<ForeignKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForeignKey {
    pub table: Ident,
    pub column: Ident,
}

/// One hop of a join chain. `left` is the side nearer the chain's root;
/// the underlying foreign key may point either way.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinStep {
    pub left_table: Ident,
    pub left_column: Ident,
    pub right_table: Ident,
    pub right_column: Ident,
}

/// A connected chain of foreign-key hops from a root table to a set of
/// target tables, materializing a multi-table FROM/WHERE join.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JoinPath {
    pub steps: Vec<JoinStep>,
}

impl SourceSchema {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.matches(name))
    }
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name.matches(name))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Location, message: String },
    #[error("schema error: {detail}")]
    Schema { detail: String },
}

impl From<XmlError> for SchemaError {
    fn from(e: XmlError) -> Self {
        SchemaError::Syntax { at: e.at, message: e.message }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JoinPathError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("no foreign-key join path to table `{0}`")]
    NoJoinPath(String),
}

/// Parse a source schema document.
///
/// ```text
/// <schema name="...">
///   <table name="...">
///     <column name="..." type="number|string|date" [pk="true"]
///             [nullable="true"] [fk="Table.Column"]/>
///   </table>
/// </schema>
/// ```
pub fn parse_source_schema(text: &str) -> Result<SourceSchema, SchemaError> {
    let doc = xml::parse(text)?;
    let root = xml::root(&doc, "schema")?;
    xml::check_attrs(&doc, root, &["name"])?;
    let name = Ident::new(xml::require_attr(&doc, root, "name")?);

    let mut tables = Vec::new();
    for table_node in xml::children(&doc, root, &["table"])? {
        xml::check_attrs(&doc, table_node, &["name"])?;
        let table_name = Ident::new(xml::require_attr(&doc, table_node, "name")?);
        let mut columns = Vec::new();
        let mut primary_key = Vec::new();
        for col_node in xml::children(&doc, table_node, &["column"])? {
            xml::check_attrs(&doc, col_node, &["name", "type", "pk", "nullable", "fk"])?;
            let col_name = Ident::new(xml::require_attr(&doc, col_node, "name")?);
            let type_text = xml::require_attr(&doc, col_node, "type")?;
            let data_type = DataType::parse(type_text).ok_or_else(|| SchemaError::Syntax {
                at: xml::node_loc(&doc, col_node),
                message: format!("unknown column type `{type_text}`"),
            })?;
            let nullable = flag(&doc, col_node, "nullable")?;
            if flag(&doc, col_node, "pk")? {
                primary_key.push(col_name.clone());
            }
            let foreign_key = match col_node.attribute("fk") {
                None => None,
                Some(spec) => match spec.split_once('.') {
                    Some((t, c)) if !t.is_empty() && !c.is_empty() => {
                        Some(ForeignKey { table: Ident::new(t), column: Ident::new(c) })
                    }
                    _ => {
                        return Err(SchemaError::Syntax {
                            at: xml::node_loc(&doc, col_node),
                            message: format!("fk must be `Table.Column`, got `{spec}`"),
                        })
                    }
                },
            };
            columns.push(Column { name: col_name, data_type, nullable, foreign_key });
        }
        tables.push(Table { name: table_name, columns, primary_key });
    }

    let schema = SourceSchema { name, tables };
    check_invariants(&schema)?;
    Ok(schema)
}

fn flag(doc: &roxmltree::Document, node: roxmltree::Node, name: &str) -> Result<bool, SchemaError> {
    match node.attribute(name) {
        None => Ok(false),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => Err(SchemaError::Syntax {
            at: xml::node_loc(doc, node),
            message: format!("attribute `{name}` must be \"true\" or \"false\", got `{other}`"),
        }),
    }
}

fn check_invariants(schema: &SourceSchema) -> Result<(), SchemaError> {
    let mut seen = BTreeSet::new();
    for table in &schema.tables {
        if !seen.insert(table.name.folded().to_string()) {
            return Err(SchemaError::Schema {
                detail: format!("duplicate table `{}`", table.name),
            });
        }
        let mut cols = BTreeSet::new();
        for column in &table.columns {
            if !cols.insert(column.name.folded().to_string()) {
                return Err(SchemaError::Schema {
                    detail: format!("duplicate column `{}.{}`", table.name, column.name),
                });
            }
        }
        if table.primary_key.is_empty() {
            return Err(SchemaError::Schema {
                detail: format!("table `{}` has no primary key column", table.name),
            });
        }
        for column in &table.columns {
            if let Some(fk) = &column.foreign_key {
                let target = schema.table(fk.table.as_str()).ok_or_else(|| SchemaError::Schema {
                    detail: format!(
                        "foreign key `{}.{}` references unknown table `{}`",
                        table.name, column.name, fk.table
                    ),
                })?;
                let target_col =
                    target.column(fk.column.as_str()).ok_or_else(|| SchemaError::Schema {
                        detail: format!(
                            "foreign key `{}.{}` references unknown column `{}.{}`",
                            table.name, column.name, fk.table, fk.column
                        ),
                    })?;
                if target_col.data_type != column.data_type {
                    return Err(SchemaError::Schema {
                        detail: format!(
                            "foreign key `{}.{}` ({}) does not match `{}.{}` ({})",
                            table.name,
                            column.name,
                            column.data_type,
                            fk.table,
                            fk.column,
                            target_col.data_type
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Write a schema back out in the document format; `parse_source_schema`
/// of the result is structurally equal to the input.
pub fn serialize_source_schema(schema: &SourceSchema) -> String {
    let mut out = String::new();
    out.push_str(&format!("<schema name=\"{}\">\n", xml::escape_attr(schema.name.as_str())));
    for table in &schema.tables {
        out.push_str(&format!("  <table name=\"{}\">\n", xml::escape_attr(table.name.as_str())));
        for column in &table.columns {
            out.push_str(&format!(
                "    <column name=\"{}\" type=\"{}\"",
                xml::escape_attr(column.name.as_str()),
                column.data_type
            ));
            if table.primary_key.iter().any(|k| k == &column.name) {
                out.push_str(" pk=\"true\"");
            }
            if column.nullable {
                out.push_str(" nullable=\"true\"");
            }
            if let Some(fk) = &column.foreign_key {
                out.push_str(&format!(" fk=\"{}.{}\"", xml::escape_attr(fk.table.as_str()), xml::escape_attr(fk.column.as_str())));
            }
            out.push_str("/>\n");
        }
        out.push_str("  </table>\n");
    }
    out.push_str("</schema>\n");
    out
}

/// An undirected foreign-key edge between two tables.
#[derive(Debug, Clone)]
struct FkEdge {
    from: Ident,
    from_column: Ident,
    to: Ident,
    to_column: Ident,
}

/// Shortest join chain from `root` to every table in `targets`, by
/// breadth-first search over the undirected foreign-key graph. Ties
/// break on (table name, column name) lexicographic order, so the
/// result is deterministic. Steps are oriented root-outward and listed
/// in the order their far table first joins the chain.
pub fn fk_join_path(
    schema: &SourceSchema,
    root: &Ident,
    targets: &[Ident],
) -> Result<JoinPath, JoinPathError> {
    let root_table =
        schema.table(root.as_str()).ok_or_else(|| JoinPathError::UnknownTable(root.to_string()))?;
    for t in targets {
        if schema.table(t.as_str()).is_none() {
            return Err(JoinPathError::UnknownTable(t.to_string()));
        }
    }

    // adjacency: folded table name -> sorted outgoing undirected edges
    let mut adjacency: BTreeMap<String, Vec<FkEdge>> = BTreeMap::new();
    for table in &schema.tables {
        for column in &table.columns {
            if let Some(fk) = &column.foreign_key {
                let target = schema.table(fk.table.as_str()).unwrap();
                let forward = FkEdge {
                    from: table.name.clone(),
                    from_column: column.name.clone(),
                    to: target.name.clone(),
                    to_column: fk.column.clone(),
                };
                let backward = FkEdge {
                    from: target.name.clone(),
                    from_column: fk.column.clone(),
                    to: table.name.clone(),
                    to_column: column.name.clone(),
                };
                adjacency.entry(table.name.folded().to_string()).or_default().push(forward);
                adjacency.entry(target.name.folded().to_string()).or_default().push(backward);
            }
        }
    }
    for edges in adjacency.values_mut() {
        edges.sort_by(|a, b| {
            (a.to.folded(), a.to_column.folded(), a.from_column.folded()).cmp(&(
                b.to.folded(),
                b.to_column.folded(),
                b.from_column.folded(),
            ))
        });
    }

    // BFS parent pointers from the root
    let mut parent: BTreeMap<String, FkEdge> = BTreeMap::new();
    let mut visited: BTreeSet<String> = BTreeSet::new();
    visited.insert(root_table.name.folded().to_string());
    let mut queue = VecDeque::from([root_table.name.clone()]);
    while let Some(table) = queue.pop_front() {
        if let Some(edges) = adjacency.get(table.folded()) {
            for edge in edges {
                if visited.insert(edge.to.folded().to_string()) {
                    parent.insert(edge.to.folded().to_string(), edge.clone());
                    queue.push_back(edge.to.clone());
                }
            }
        }
    }

    let mut sorted_targets: Vec<&Ident> = targets.iter().collect();
    sorted_targets.sort();
    sorted_targets.dedup_by(|a, b| a == b);

    let mut steps: Vec<JoinStep> = Vec::new();
    let mut covered: BTreeSet<String> = BTreeSet::new();
    covered.insert(root_table.name.folded().to_string());
    for target in sorted_targets {
        if target.folded() == root_table.name.folded() {
            continue;
        }
        if !visited.contains(target.folded()) {
            return Err(JoinPathError::NoJoinPath(target.to_string()));
        }
        // walk target -> root, then append the new hops root-outward
        let mut chain = Vec::new();
        let mut cursor = target.folded().to_string();
        while let Some(edge) = parent.get(&cursor) {
            chain.push(edge.clone());
            cursor = edge.from.folded().to_string();
        }
        for edge in chain.into_iter().rev() {
            if covered.insert(edge.to.folded().to_string()) {
                steps.push(JoinStep {
                    left_table: edge.from,
                    left_column: edge.from_column,
                    right_table: edge.to,
                    right_column: edge.to_column,
                });
            }
        }
    }
    Ok(JoinPath { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SALES: &str = include_str!("../../../fixtures/sales/schema.xml");

    #[test]
    fn parses_the_sales_schema() {
        let schema = parse_source_schema(SALES).unwrap();
        assert_eq!(schema.tables.len(), 6);
        let client = schema.table("client").unwrap();
        assert_eq!(client.columns.len(), 5);
        assert_eq!(client.primary_key, vec![Ident::new("codeC")]);
        let lf = schema.table("lignes_fact").unwrap();
        assert_eq!(lf.primary_key.len(), 2);
    }

    #[test]
    fn parses_an_empty_schema() {
        let schema = parse_source_schema("<schema name=\"vide\"></schema>").unwrap();
        assert!(schema.tables.is_empty());
    }

    #[test]
    fn rejects_dangling_foreign_key() {
        let text = r#"<schema name="s">
            <table name="Facture">
              <column name="refF" type="string" pk="true"/>
              <column name="codeC" type="number" fk="Client.codeC"/>
            </table>
        </schema>"#;
        match parse_source_schema(text) {
            Err(SchemaError::Schema { detail }) => assert!(detail.contains("unknown table")),
            other => panic!("expected SchemaError, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_tables_case_insensitively() {
        let text = r#"<schema name="s">
            <table name="Produit"><column name="a" type="number" pk="true"/></table>
            <table name="produit"><column name="a" type="number" pk="true"/></table>
        </schema>"#;
        assert!(matches!(parse_source_schema(text), Err(SchemaError::Schema { .. })));
    }

    #[test]
    fn rejects_unknown_attributes() {
        let text = r#"<schema name="s" extra="1"></schema>"#;
        assert!(matches!(parse_source_schema(text), Err(SchemaError::Syntax { .. })));
    }

    #[test]
    fn round_trips_through_serialization() {
        let schema = parse_source_schema(SALES).unwrap();
        let text = serialize_source_schema(&schema);
        let again = parse_source_schema(&text).unwrap();
        assert_eq!(schema, again);
    }

    #[test]
    fn golden_join_chain_for_dim_produit() {
        let schema = parse_source_schema(SALES).unwrap();
        let path = fk_join_path(
            &schema,
            &Ident::new("Produit"),
            &[Ident::new("categorie"), Ident::new("sous_categorie")],
        )
        .unwrap();
        let rendered: Vec<String> = path
            .steps
            .iter()
            .map(|s| {
                format!(
                    "{}.{} = {}.{}",
                    s.left_table, s.left_column, s.right_table, s.right_column
                )
            })
            .collect();
        assert_eq!(
            rendered,
            vec![
                "Produit.codecat = categorie.codecat",
                "categorie.codesouscat = sous_categorie.codesouscat",
            ]
        );
    }

    #[test]
    fn empty_targets_yield_empty_path() {
        let schema = parse_source_schema(SALES).unwrap();
        let path = fk_join_path(&schema, &Ident::new("client"), &[]).unwrap();
        assert!(path.steps.is_empty());
    }

    #[test]
    fn no_fk_schema_always_errors_on_targets() {
        let text = r#"<schema name="s">
            <table name="a"><column name="x" type="number" pk="true"/></table>
            <table name="b"><column name="y" type="number" pk="true"/></table>
        </schema>"#;
        let schema = parse_source_schema(text).unwrap();
        let err = fk_join_path(&schema, &Ident::new("a"), &[Ident::new("b")]).unwrap_err();
        assert_eq!(err, JoinPathError::NoJoinPath("b".into()));
    }

    #[test]
    fn path_never_repeats_a_table() {
        let schema = parse_source_schema(SALES).unwrap();
        let path = fk_join_path(
            &schema,
            &Ident::new("client"),
            &[Ident::new("Produit"), Ident::new("categorie")],
        )
        .unwrap();
        let mut seen = BTreeSet::new();
        seen.insert("client".to_string());
        for step in &path.steps {
            assert!(seen.contains(step.left_table.folded()), "left side already joined");
            assert!(seen.insert(step.right_table.folded().to_string()), "table joined twice");
        }
    }
}
