//! Greedy liveness-based row allocation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::netlist::{Node, NodeId, NorNetlist};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowBudget {
    pub total_rows: usize,
    /// Rows usable for inputs and intermediate values; the rest hold the
    /// constants.
    pub rows_available: usize,
}

impl Default for RowBudget {
    fn default() -> Self {
        RowBudget {
            total_rows: 64,
            rows_available: 62,
        }
    }
}

impl RowBudget {
    pub fn const_row(&self, value: bool) -> usize {
        self.rows_available + value as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows_available + 2 > self.total_rows || self.rows_available == 0 {
            return Err(Error::Config(format!(
                "{} value rows plus 2 constant rows do not fit in {} rows",
                self.rows_available, self.total_rows
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowAssignment {
    /// Row holding each node's value.
    pub node_row: Vec<usize>,
    /// Peak simultaneously live values (inputs included).
    pub peak_live: usize,
    /// Peak simultaneously live gate outputs.
    pub peak_value_rows: usize,
    /// Distinct rows touched, constants included.
    pub rows_used: usize,
}

/// Inputs take dedicated rows `0..n`. Gates are visited in netlist order;
/// each gets the lowest free row, and its operands' rows are released after
/// it if it was their last consumer. Output values stay live to the end.
pub fn allocate_rows(netlist: &NorNetlist, budget: RowBudget) -> Result<RowAssignment> {
    budget.validate()?;
    let n = netlist.nodes.len();
    let mut last_use: Vec<Option<usize>> = vec![None; n];
    for (id, node) in netlist.nodes.iter().enumerate() {
        if let Node::Nor(ops) = node {
            for &o in ops {
                last_use[o] = Some(id);
            }
        }
    }
    let mut pinned = vec![false; n];
    for (_, o) in &netlist.outputs {
        pinned[*o] = true;
    }

    let n_inputs = netlist.inputs.len();
    if n_inputs > budget.rows_available {
        return Err(Error::Capacity {
            live: n_inputs,
            available: budget.rows_available,
            node: 0,
            cut: format!("{n_inputs} inputs"),
        });
    }

    let mut node_row = vec![usize::MAX; n];
    let mut free: BTreeSet<usize> = (n_inputs..budget.rows_available).collect();
    let mut live: BTreeSet<NodeId> = BTreeSet::new();
    let mut peak_live = n_inputs;
    let mut peak_value_rows = 0;
    let mut value_rows = 0usize;
    let mut used: BTreeSet<usize> = (0..n_inputs).collect();

    for (id, node) in netlist.nodes.iter().enumerate() {
        match node {
            Node::Input(i) => {
                node_row[id] = *i;
                live.insert(id);
            }
            Node::Const(v) => {
                node_row[id] = budget.const_row(*v);
                used.insert(node_row[id]);
            }
            Node::Nor(ops) => {
                let Some(row) = free.pop_first() else {
                    let names: Vec<String> = live
                        .iter()
                        .map(|&l| match &netlist.nodes[l] {
                            Node::Input(i) => netlist.inputs[*i].clone(),
                            _ => format!("n{l}"),
                        })
                        .collect();
                    return Err(Error::Capacity {
                        live: live.len(),
                        available: budget.rows_available,
                        node: id,
                        cut: names.join(", "),
                    });
                };
                node_row[id] = row;
                used.insert(row);
                live.insert(id);
                value_rows += 1;
                peak_live = peak_live.max(live.len());
                peak_value_rows = peak_value_rows.max(value_rows);
                for &o in ops {
                    let is_gate = matches!(netlist.nodes[o], Node::Nor(_));
                    if is_gate && last_use[o] == Some(id) && !pinned[o] && live.remove(&o) {
                        free.insert(node_row[o]);
                        value_rows -= 1;
                    }
                }
            }
        }
    }

    Ok(RowAssignment {
        node_row,
        peak_live,
        peak_value_rows,
        rows_used: used.len(),
    })
}
