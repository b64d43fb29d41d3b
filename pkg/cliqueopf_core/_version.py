__version__ = '0.1.0'
__desc__ = "Solves the SDP relaxation of optimal power flow by clique decomposition"
