#pragma once

// Contents of data/templates.json and data/lexicon.json, compiled in at
// configure time.
namespace slu::resources {
extern const char* const kDefaultTemplates;
extern const char* const kDefaultLexicon;
}  // namespace slu::resources
