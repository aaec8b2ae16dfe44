//! Conversions between the reference model and the crate's types.

#![allow(dead_code)]

use super::oracle::{Net, OAction, OState};
use vnfsim_core::mdp::{MdpAction, MdpState};
use vnfsim_core::model::{AllocationMatrix, EcNode, Event, Scenario, Topology, VnfType};

pub fn scenario(net: &Net) -> Scenario {
    Scenario::new(
        Topology::new(net.ecs.iter().map(|&(c, b)| EcNode::new(c, b)).collect()).unwrap(),
        net.types
            .iter()
            .map(|&(c, b, l, m)| VnfType::new(c, b, l, m).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn state(s: &OState) -> MdpState {
    let event = if s.arrival {
        Event::arrival(s.vnf_type)
    } else {
        Event::departure(s.vnf_type)
    };
    MdpState::new(AllocationMatrix::from_rows(&s.counts), event)
}

pub fn action(a: OAction) -> MdpAction {
    match a {
        OAction::Reject => MdpAction::Reject,
        OAction::Place(k) => MdpAction::PlaceAt(k),
        OAction::Void => MdpAction::Void,
    }
}
