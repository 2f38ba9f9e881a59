# HTTP API, command line and scan service for genescan
