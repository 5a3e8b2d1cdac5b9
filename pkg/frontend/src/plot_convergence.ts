#!/usr/bin/env node
import { runConvergence } from "./convergence";

process.exit(runConvergence(process.argv.slice(2)));
