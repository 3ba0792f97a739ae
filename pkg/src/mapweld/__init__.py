"""mapweld: georeference HD vector/point-cloud maps against an RTK-GNSS
trajectory and conflate OpenStreetMap semantics into the vector map."""

__version__ = "0.1.0"
