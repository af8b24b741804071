// Loads the shipped toy fixture (12 entities, 8 mentions) for pipeline tests.
#pragma once

#include <memory>

#include "medlink/corpus.hpp"
#include "medlink/distillgen.hpp"
#include "medlink/embedstore.hpp"
#include "medlink/promptkit.hpp"
#include "medlink/retriever.hpp"
#include "oracles.hpp"

namespace oracle {

struct Toy {
  medlink::KnowledgeBase kb;
  std::vector<medlink::Mention> train;
  std::vector<medlink::Mention> test;
  medlink::EmbeddingStore entities;
  medlink::EmbeddingStore mentions;
  medlink::EntityIndex index;
  medlink::PromptTemplate teacher;
  medlink::PromptTemplate student;

  Toy()
      : kb(medlink::load_kb(toy_dir() / "kb.tsv")),
        train(medlink::load_mentions(toy_dir() / "mentions.tsv", medlink::MentionFormat::normalized_tsv,
                                     medlink::Split::train)),
        test(medlink::load_mentions(toy_dir() / "mentions.tsv", medlink::MentionFormat::normalized_tsv,
                                    medlink::Split::test)),
        entities(medlink::load_store(toy_dir() / "entities.emb.json")),
        mentions(medlink::load_store(toy_dir() / "mentions.emb.json")),
        index(kb, entities),
        teacher(medlink::load_template(source_dir() / "templates" / "teacher_en.json")),
        student(medlink::load_template(source_dir() / "templates" / "student_en.json")) {}

  medlink::LinkingContext context() const { return {kb, index, mentions}; }
};

}  // namespace oracle
