# Abstraction, synthesis and pipeline services
