# Command dispatch for the rca-verify entry point